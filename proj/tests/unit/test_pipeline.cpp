#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "radscan/errors.hpp"
#include "radscan/pipeline.hpp"
#include "radscan/scan_engine.hpp"

using namespace radscan;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

// Writes a small workspace config into `root` and returns its path.
std::string write_config(const fs::path& root, const std::string& extra = "") {
  fs::create_directories(root);
  const auto path = root / "config.json";
  std::ofstream(path) << R"({
  // small and fast
  "paths": { "spectra_dir": "spectra", "runs_dir": "runs", "labels_file": "labels.csv",
             "calibration_file": "out/calibration.csv", "output_dir": "out" },
  "null_density": { "training_runs": 4 },
  "calibration": { "runs": 12 },
  "simulator": { "n_null": 30, "per_source": 2, "duration_min_s": 42, "duration_max_s": 48 },
  "seed": 11)" + extra + "\n}\n";
  return path.string();
}

void run_all(const PipelineConfig& c, std::ostream& log) {
  cmd_simulate(c, log);
  cmd_build_tables(c, log);
  cmd_calibrate(c, log);
  cmd_score(c, log);
  cmd_evaluate(c, log);
}

// One complete workspace shared by the tests that only read it.
const fs::path& shared_root() {
  static const fs::path root = [] {
    const auto r = fs::temp_directory_path() / "radscan_pipeline_shared";
    fs::remove_all(r);
    std::ostringstream log;
    run_all(load_pipeline_config(write_config(r)), log);
    return r;
  }();
  return root;
}

PipelineConfig shared_config() { return load_pipeline_config((shared_root() / "config.json").string()); }

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("config loading resolves paths against the config directory") {
  const auto root = fs::temp_directory_path() / "radscan_pipeline_cfg";
  const auto c = load_pipeline_config(write_config(root, R"(, "workers": 3, "time_format": "delta-us",
    "scan": { "bandwidths_s": [1.0, 2.0] }, "evaluation": { "phi": 3, "phis": [1, 2] })"));
  CHECK(c.paths.runs_dir == (root / "runs").string());
  CHECK(c.workers == 3);
  CHECK(c.time_format == TimeFormat::DeltaMicroseconds);
  CHECK(c.scan.bandwidths_s == std::vector<double>{1.0, 2.0});
  CHECK(c.phi == 3.0);
  CHECK(c.thresholds() == std::vector<double>{1.0, 2.0});
  CHECK(c.null_training_runs == 4);
  CHECK(c.sim_batch.duration_min_s == 42.0);
  CHECK(load_pipeline_config(write_config(root)).thresholds().size() == 241);

  std::ofstream(root / "bad.json") << "{ \"seed\": \"x\" }";
  CHECK_THROWS_AS(load_pipeline_config((root / "bad.json").string()), ParseError);
  CHECK_THROWS_AS(load_pipeline_config((root / "absent.json").string()), IoError);
}

TEST_CASE("end to end on a simulated workspace") {
  const auto& root = shared_root();
  const auto c = shared_config();
  CHECK(count_lines(root / "labels.csv") == 1 + 30 + 24);
  CHECK(count_lines(root / "out" / "metrics.csv") == 1 + 241);
  CHECK(fs::exists(root / "out" / "confusion_phi2.5.csv"));
  CHECK(fs::exists(root / "out" / "localization_phi2.5.csv"));

  const auto scores = read_scores_csv(c.scores_path());
  // 54 runs minus 4 training and 12 calibration runs.
  CHECK(scores.size() == 54 - 16);
  const auto training = slurp(c.training_manifest_path());
  const auto calibration = slurp(c.calibration_manifest_path());
  for (const auto& r : scores) {
    CHECK(training.find(r.run_id + "\n") == std::string::npos);
    CHECK(calibration.find(r.run_id + "\n") == std::string::npos);
  }
}

TEST_CASE("build-tables output") {
  const auto& root = shared_root();
  const auto c = shared_config();
  const auto table = load_log_ratio_table(c.table_path());
  CHECK(table.variants().size() == 12);
  CHECK(table.contains({6, true}));
  for (const auto& k : table.variants()) CHECK(fs::exists(root / "out" / "tables" / ("ratio_" + k.to_string() + ".csv")));
  CHECK(count_lines(c.training_manifest_path()) == 1 + 4);

  const auto before = slurp(c.table_path());
  std::ostringstream log;
  cmd_build_tables(c, log);
  CHECK(slurp(c.table_path()) == before);
}

TEST_CASE("missing spectrum file names the variant") {
  const auto root = fs::temp_directory_path() / "radscan_pipeline_missing";
  fs::remove_all(root);
  fs::create_directories(root);
  fs::copy(shared_root() / "spectra", root / "spectra");
  fs::copy(shared_root() / "runs", root / "runs");
  fs::copy(shared_root() / "labels.csv", root / "labels.csv");
  fs::remove(root / "spectra" / "source3_shielded.csv");
  const auto c = load_pipeline_config(write_config(root));
  std::ostringstream log;
  try {
    cmd_build_tables(c, log);
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("source 3 shielded") != std::string::npos);
  }
}

TEST_CASE("scoring is independent of the worker count and repeatable") {
  auto c = shared_config();
  const auto inputs_before = snapshot(shared_root() / "runs");
  const auto labels_before = slurp(shared_root() / "labels.csv");
  const auto reference = slurp(c.scores_path());
  std::ostringstream log;
  c.workers = 4;
  cmd_score(c, log);
  CHECK(slurp(c.scores_path()) == reference);
  c.workers = 1;
  cmd_score(c, log);
  CHECK(slurp(c.scores_path()) == reference);
  const auto metrics = slurp(shared_root() / "out" / "metrics.csv");
  cmd_evaluate(c, log);
  CHECK(slurp(shared_root() / "out" / "metrics.csv") == metrics);
  CHECK(snapshot(shared_root() / "runs") == inputs_before);
  CHECK(slurp(shared_root() / "labels.csv") == labels_before);
}

TEST_CASE("a calibration from a different scan configuration is rejected") {
  auto c = shared_config();
  c.scan.bandwidths_s = {0.5, 1.0};
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_score(c, log), CalibrationMismatch);
}

TEST_CASE("evaluate refuses mismatched inputs") {
  const auto root = fs::temp_directory_path() / "radscan_pipeline_orphans";
  fs::remove_all(root);
  fs::create_directories(root / "out");
  const auto c0 = shared_config();
  fs::copy(c0.paths.output_dir, root / "out", fs::copy_options::recursive);
  auto c = load_pipeline_config(write_config(root));
  std::ostringstream log;

  SUBCASE("label without a score") {
    auto labels = slurp(c0.paths.labels_file);
    labels += "run_09999,2,40\n";
    std::ofstream(c.paths.labels_file) << labels;
    CHECK_THROWS_AS(cmd_evaluate(c, log), InvalidInput);
  }
  SUBCASE("scores for held-out runs") {
    fs::copy_file(c0.paths.labels_file, c.paths.labels_file);
    auto scores = read_scores_csv(c.scores_path());
    std::ifstream manifest(c.calibration_manifest_path());
    std::string header, id;
    std::getline(manifest, header);
    std::getline(manifest, id);
    scores.push_back(scores.front());
    scores.back().run_id = id;
    write_scores_csv(scores, c.scores_path());
    CHECK_THROWS_AS(cmd_evaluate(c, log), InvalidInput);
  }
}

TEST_CASE("delta-microsecond run files") {
  const auto root = fs::temp_directory_path() / "radscan_pipeline_delta";
  fs::remove_all(root);
  const auto c = load_pipeline_config(write_config(root, R"(, "time_format": "delta-us")"));
  std::ostringstream log;
  run_all(c, log);
  const auto a = read_scores_csv(c.scores_path());
  const auto b = read_scores_csv(shared_config().scores_path());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].run_id == b[i].run_id);
    CHECK(a[i].T == doctest::Approx(b[i].T).epsilon(1e-6));
    CHECK(a[i].k_hat == b[i].k_hat);
  }
}

#ifdef RADSCAN_CLI_PATH
TEST_CASE("command line exit codes") {
  const std::string cli = RADSCAN_CLI_PATH;
  const auto root = fs::temp_directory_path() / "radscan_pipeline_cli";
  fs::remove_all(root);
  const auto config = write_config(root);
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > " + (root / "cli.log").string() + " 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("--config " + config + " evaluate") == 1);
  CHECK(run("--config " + config + " --time-format hours score") != 0);
  CHECK(run("--config " + config + " bogus") != 0);
  CHECK(run("--config " + (root / "absent.json").string() + " score") != 0);
  CHECK(run("--config " + config + " --seed 4 simulate") == 0);
  CHECK(fs::exists(root / "labels.csv"));
}
#endif
