#include "radscan/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>

#include <json.hpp>

#include "csv.hpp"
#include "radscan/calibration.hpp"
#include "radscan/errors.hpp"
#include "radscan/evaluation.hpp"
#include "radscan/parallel.hpp"
#include "radscan/scan_engine.hpp"
#include "radscan/synthetic_spectra.hpp"

namespace radscan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

template <typename T>
void read_opt(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw IoError(std::string(what) + " directory does not exist: " + path);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " does not exist: " + path);
}

std::vector<std::string> read_id_manifest(const std::string& path) {
  if (!fs::exists(path)) return {};
  const auto csv = detail::read_csv(path);
  const auto col = csv.column("run_id");
  std::vector<std::string> ids;
  for (const auto& row : csv.rows) ids.push_back(row[col]);
  return ids;
}

void write_id_manifest(const std::vector<std::string>& ids, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "run_id\n";
  for (const auto& id : ids) out << id << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// Seeded, order-independent choice of up to `count` ids.
std::vector<std::string> choose_ids(std::vector<std::string> ids, std::size_t count, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(ids[i - 1], ids[j]);
  }
  ids.resize(std::min(count, ids.size()));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string run_path(const PipelineConfig& config, const std::string& run_id) {
  return join_path(config.paths.runs_dir, run_id + ".csv");
}

std::vector<Run> load_runs(const PipelineConfig& config, const std::vector<std::string>& ids) {
  std::vector<std::optional<Run>> loaded(ids.size());
  parallel_for(ids.size(), config.workers, [&](std::size_t i) {
    loaded[i] = read_run_csv(run_path(config, ids[i]), ids[i], config.time_format);
  });
  std::vector<Run> runs;
  runs.reserve(ids.size());
  for (auto& r : loaded) runs.push_back(std::move(*r));
  return runs;
}

std::vector<std::string> null_run_ids(const PipelineConfig& config) {
  require_file(config.paths.labels_file, "labels file");
  std::vector<std::string> ids;
  for (const auto& g : read_labels_csv(config.paths.labels_file)) {
    if (g.source_id == 0) ids.push_back(g.run_id);
  }
  return ids;
}

std::set<std::string> held_out_ids(const PipelineConfig& config) {
  std::set<std::string> ids;
  for (const auto& id : read_id_manifest(config.training_manifest_path())) ids.insert(id);
  for (const auto& id : read_id_manifest(config.calibration_manifest_path())) ids.insert(id);
  return ids;
}

}  // namespace

// -- config -----------------------------------------------------------------------------

std::vector<double> PipelineConfig::thresholds() const {
  if (!phis.empty()) return phis;
  std::vector<double> out;
  for (int i = 0; i <= 240; ++i) out.push_back(0.25 * i);
  return out;
}

void PipelineConfig::validate() const {
  (void)grid();
  scan.validate();
  sim_batch.validate();
  if (!(kde_bandwidth_kev > 0.0)) throw InvalidInput("config: kde_bandwidth_kev must be positive");
  if (!(density_floor > 0.0)) throw InvalidInput("config: density_floor must be positive");
  if (null_training_runs == 0) throw InvalidInput("config: null training run count must be positive");
  if (calibration_runs < 2) throw InvalidInput("config: calibration needs at least 2 runs");
  if (workers == 0) throw InvalidInput("config: workers must be at least 1");
  if (sim_batch.tau_min_s < scan.tau_min_s) {
    throw InvalidInput("config: simulated closest approaches must not precede the scan's tau_min_s");
  }
}

std::string PipelineConfig::tables_dir() const { return join_path(paths.output_dir, "tables"); }
std::string PipelineConfig::table_path() const { return join_path(tables_dir(), "log_ratio_table.bin"); }
std::string PipelineConfig::training_manifest_path() const {
  return join_path(tables_dir(), "null_training_runs.csv");
}
std::string PipelineConfig::calibration_manifest_path() const {
  return join_path(paths.output_dir, "calibration_runs.csv");
}
std::string PipelineConfig::scores_path() const { return join_path(paths.output_dir, "scores.csv"); }

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  PipelineConfig c;
  try {
    const json j = json::parse(in, nullptr, true, true);
    const fs::path base = fs::absolute(path).parent_path();
    auto resolve = [&base](std::string& p) {
      if (!p.empty() && fs::path(p).is_relative()) p = (base / p).lexically_normal().string();
    };
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      read_opt(p, "spectra_dir", c.paths.spectra_dir);
      read_opt(p, "runs_dir", c.paths.runs_dir);
      read_opt(p, "labels_file", c.paths.labels_file);
      read_opt(p, "calibration_file", c.paths.calibration_file);
      read_opt(p, "output_dir", c.paths.output_dir);
    }
    for (auto* p : {&c.paths.spectra_dir, &c.paths.runs_dir, &c.paths.labels_file, &c.paths.calibration_file,
                    &c.paths.output_dir}) {
      resolve(*p);
    }
    if (j.contains("energy_grid")) {
      const auto& g = j.at("energy_grid");
      read_opt(g, "start_kev", c.grid_start_kev);
      read_opt(g, "end_kev", c.grid_end_kev);
      read_opt(g, "step_kev", c.grid_step_kev);
    }
    if (j.contains("scan")) {
      const auto& s = j.at("scan");
      read_opt(s, "bandwidths_s", c.scan.bandwidths_s);
      read_opt(s, "tau_min_s", c.scan.tau_min_s);
      read_opt(s, "tau_step_s", c.scan.tau_step_s);
      read_opt(s, "kernel_truncation_sigmas", c.scan.kernel_truncation_sigmas);
    }
    if (j.contains("null_density")) {
      const auto& n = j.at("null_density");
      read_opt(n, "kde_bandwidth_kev", c.kde_bandwidth_kev);
      read_opt(n, "training_runs", c.null_training_runs);
      read_opt(n, "min_readings", c.min_null_readings);
    }
    read_opt(j, "density_floor", c.density_floor);
    if (j.contains("calibration")) read_opt(j.at("calibration"), "runs", c.calibration_runs);
    if (j.contains("simulator")) {
      const auto& s = j.at("simulator");
      read_opt(s, "n_null", c.sim_n_null);
      read_opt(s, "per_source", c.sim_per_source);
      read_opt(s, "write_spectra", c.sim_write_spectra);
      auto& b = c.sim_batch;
      read_opt(s, "duration_min_s", b.duration_min_s);
      read_opt(s, "duration_max_s", b.duration_max_s);
      read_opt(s, "background_rate_min_hz", b.background_rate_min_hz);
      read_opt(s, "background_rate_max_hz", b.background_rate_max_hz);
      read_opt(s, "amplitude_min_hz", b.amplitude_min_hz);
      read_opt(s, "amplitude_max_hz", b.amplitude_max_hz);
      read_opt(s, "standoff_min_s", b.standoff_min_s);
      read_opt(s, "standoff_max_s", b.standoff_max_s);
      read_opt(s, "tau_min_s", b.tau_min_s);
      read_opt(s, "tau_end_margin_s", b.tau_end_margin_s);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      read_opt(e, "phi", c.phi);
      read_opt(e, "phis", c.phis);
    }
    read_opt(j, "seed", c.seed);
    read_opt(j, "workers", c.workers);
    if (j.contains("time_format")) c.time_format = parse_time_format(j.at("time_format").get<std::string>());
    read_opt(j, "dump_z_grid", c.dump_z_grid);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return c;
}

std::string spectrum_file_name(const SourceVariantId& k) {
  return "source" + std::to_string(k.source) + (k.shielded ? "_shielded.csv" : "_unshielded.csv");
}

// -- build-tables -----------------------------------------------------------------------

void cmd_build_tables(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  require_dir(config.paths.spectra_dir, "spectra");
  const auto grid = config.grid();

  std::map<SourceVariantId, Pmf> sources;
  for (int s = 1; s <= 5; ++s) {
    for (bool shielded : {false, true}) {
      const SourceVariantId k{s, shielded};
      const auto path = join_path(config.paths.spectra_dir, spectrum_file_name(k));
      if (!fs::is_regular_file(path)) {
        throw IoError("missing spectrum for source " + std::to_string(s) + (shielded ? " shielded" : " unshielded") +
                      ": " + path);
      }
      try {
        sources.emplace(k, pmf_from_intensity_histogram(read_intensity_histogram_csv(path), grid));
      } catch (const InvalidInput& e) {
        throw InvalidInput("spectrum " + path + ": " + e.what());
      }
    }
  }
  sources = with_source6_mixture(std::move(sources));

  const auto prebuilt = join_path(config.paths.spectra_dir, "null_pmf.csv");
  std::vector<std::string> training_ids;
  std::optional<Pmf> null_pmf;
  if (fs::is_regular_file(prebuilt)) {
    null_pmf = read_pmf_csv(prebuilt);
    if (!(null_pmf->grid() == grid)) throw InvalidInput(prebuilt + ": grid differs from the configured energy grid");
    log << "null pmf: prebuilt " << prebuilt << '\n';
  } else {
    training_ids = choose_ids(null_run_ids(config), config.null_training_runs, config.seed);
    if (training_ids.empty()) throw InsufficientData("no null runs in " + config.paths.labels_file);
    std::vector<double> energies;
    for (const auto& run : load_runs(config, training_ids)) {
      for (const auto& e : run.events()) energies.push_back(e.energy_kev);
    }
    null_pmf = estimate_null_pmf(energies, grid, config.kde_bandwidth_kev, config.min_null_readings);
    log << "null pmf: KDE over " << energies.size() << " readings from " << training_ids.size() << " null runs\n";
  }

  const auto table = build_log_ratio_table(sources, *null_pmf, config.density_floor);

  const auto dir = config.tables_dir();
  write_grid_values_csv(grid, null_pmf->mass(), join_path(dir, "pmf_null.csv"));
  for (const auto& [k, pmf] : sources) {
    write_grid_values_csv(grid, pmf.mass(), join_path(dir, "pmf_" + k.to_string() + ".csv"));
    write_grid_values_csv(grid, table.ratios().at(k), join_path(dir, "ratio_" + k.to_string() + ".csv"));
  }
  save_log_ratio_table(table, config.table_path());
  write_id_manifest(training_ids, config.training_manifest_path());

  log << "tables: " << table.ratios().size() << " variants x " << grid.n_bins() << " bins -> " << dir << '\n';
  log << "table digest: " << detail::to_hex(table_digest(table)) << '\n';
}

// -- calibrate --------------------------------------------------------------------------

void cmd_calibrate(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  require_file(config.table_path(), "log-ratio table (run build-tables first)");
  require_dir(config.paths.runs_dir, "runs");
  const auto table = load_log_ratio_table(config.table_path());

  const auto training = read_id_manifest(config.training_manifest_path());
  const std::set<std::string> excluded(training.begin(), training.end());
  std::vector<std::string> candidates;
  for (const auto& id : null_run_ids(config)) {
    if (!excluded.count(id)) candidates.push_back(id);
  }
  const auto ids = choose_ids(candidates, config.calibration_runs, config.seed ^ 0x63616c6962ULL);
  if (ids.size() < config.calibration_runs) {
    log << "warning: only " << ids.size() << " null runs available for calibration (configured "
        << config.calibration_runs << ")\n";
  }
  const auto runs = load_runs(config, ids);
  const auto calib = calibrate(runs, table, config.scan, config.workers);
  save_calibration(calib, config.paths.calibration_file);
  write_id_manifest(ids, config.calibration_manifest_path());
  log << "calibration: " << calib.entries().size() << " cells from " << calib.n_runs() << " null runs -> "
      << config.paths.calibration_file << " (fingerprint " << calib.fingerprint() << ")\n";
}

// -- score ------------------------------------------------------------------------------

void cmd_score(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  require_file(config.table_path(), "log-ratio table (run build-tables first)");
  require_file(config.paths.calibration_file, "calibration file (run calibrate first)");
  require_dir(config.paths.runs_dir, "runs");
  const auto table = load_log_ratio_table(config.table_path());
  const auto calib = load_calibration(config.paths.calibration_file, scan_fingerprint(config.scan, table));

  const auto held_out = held_out_ids(config);
  std::vector<std::string> ids;
  std::size_t skipped = 0;
  for (const auto& entry : fs::directory_iterator(config.paths.runs_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    auto id = entry.path().stem().string();
    if (held_out.count(id)) {
      ++skipped;
      continue;
    }
    ids.push_back(std::move(id));
  }
  std::sort(ids.begin(), ids.end());

  std::vector<std::optional<ScanResult>> slots(ids.size());
  parallel_for(ids.size(), config.workers, [&](std::size_t i) {
    const auto run = read_run_csv(run_path(config, ids[i]), ids[i], config.time_format);
    slots[i] = scan_run(run, table, calib, config.scan);
  });
  std::vector<ScanResult> results;
  results.reserve(slots.size());
  for (auto& s : slots) results.push_back(std::move(*s));

  write_scores_csv(results, config.scores_path());
  if (config.dump_z_grid) write_z_grid_csv(results, join_path(config.paths.output_dir, "z_grid.csv"));
  log << "scored " << results.size() << " runs (" << skipped << " calibration/training runs skipped) -> "
      << config.scores_path() << '\n';
}

// -- simulate ---------------------------------------------------------------------------

void cmd_simulate(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  const auto synthetic = make_synthetic_spectra();
  const auto library = make_spectrum_library(synthetic, config.grid());
  if (config.sim_write_spectra) {
    for (const auto& [k, hist] : synthetic.sources) {
      write_intensity_histogram_csv(hist, join_path(config.paths.spectra_dir, spectrum_file_name(k)));
    }
  }
  const auto runs = simulate_batch(config.sim_n_null, config.sim_per_source, config.sim_batch, config.seed, library,
                                   config.workers);
  const auto manifest = write_batch(runs, config.paths.runs_dir, config.paths.labels_file, config.time_format);
  log << "simulated " << manifest.size() << " runs (" << config.sim_n_null << " null, " << config.sim_per_source
      << " per variant) -> " << config.paths.runs_dir << ", labels " << config.paths.labels_file << '\n';
}

// -- evaluate ---------------------------------------------------------------------------

void cmd_evaluate(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  require_file(config.scores_path(), "scores file (run score first)");
  require_file(config.paths.labels_file, "labels file");
  const auto results = read_scores_csv(config.scores_path());
  const auto held_out = held_out_ids(config);
  for (const auto& r : results) {
    if (held_out.count(r.run_id)) {
      throw InvalidInput("run " + r.run_id + " was used for calibration or null-density training and cannot be evaluated");
    }
  }
  std::vector<GroundTruth> labels;
  for (auto& g : read_labels_csv(config.paths.labels_file)) {
    if (!held_out.count(g.run_id)) labels.push_back(std::move(g));
  }
  const auto outcomes = join_outcomes(labels, results);

  const auto metrics = metrics_over_thresholds(outcomes, config.thresholds());
  const auto confusion = confusion_matrix(outcomes, config.phi);
  const auto dir = config.paths.output_dir;
  write_metrics_csv(metrics, join_path(dir, "metrics.csv"));
  write_confusion_csv(confusion, join_path(dir, "confusion_phi" + phi_label(config.phi) + ".csv"));
  write_localization_csv(outcomes, config.phi, join_path(dir, "localization_phi" + phi_label(config.phi) + ".csv"));

  const std::vector<double> at_phi{config.phi};
  const auto m = metrics_over_thresholds(outcomes, at_phi).front();
  log << "evaluated " << outcomes.size() << " runs at phi=" << phi_label(config.phi) << ": tpr="
      << detail::format_6g(m.tpr) << " fpr=" << detail::format_6g(m.fpr) << " precision="
      << detail::format_6g(m.precision) << " id_accuracy=" << detail::format_6g(m.id_accuracy)
      << " median_loc_s=" << detail::format_6g(m.localization.median_s) << '\n';
}

}  // namespace radscan
