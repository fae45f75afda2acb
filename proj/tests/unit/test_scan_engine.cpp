#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "radscan/calibration.hpp"
#include "radscan/errors.hpp"
#include "radscan/scan_engine.hpp"

using namespace radscan;

namespace {

// Untruncated dense evaluation of the smoothed score on the tau grid: every event,
// every grid point, no window.
TauMaximum brute_force_maximum(const std::vector<double>& evidence, const std::vector<double>& times, double h,
                               const ScanConfig& config) {
  TauMaximum best{-1.0, 0.0};
  const double last = times.back();
  for (std::size_t j = 0;; ++j) {
    const double tau = config.tau_min_s + static_cast<double>(j) * config.tau_step_s;
    if (j > 0 && tau > last + 1e-9) break;
    double s = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double d = times[i] - tau;
      s += std::exp(-(d * d) / (2.0 * h * h)) * evidence[i];
    }
    if (s > best.s_tilde) best = {s, tau};
  }
  return best;
}

// Evidence 1 for every energy, every variant.
LogRatioTable flat_table(const std::vector<SourceVariantId>& variants, double value = 1.0) {
  const EnergyGrid grid;
  std::map<SourceVariantId, std::vector<double>> ratios;
  for (const auto& k : variants) ratios.emplace(k, std::vector<double>(grid.n_bins(), value));
  return LogRatioTable(grid, std::move(ratios));
}

NullCalibration unit_calibration(const LogRatioTable& table, const ScanConfig& config, double mu0 = 0.0,
                                 double sigma0 = 1.0) {
  std::map<ScanKey, NullStats> entries;
  for (const auto& k : table.variants()) {
    for (double h : config.bandwidths_s) entries.emplace(ScanKey{k, h}, NullStats{mu0, sigma0});
  }
  return NullCalibration(std::move(entries), 2, scan_fingerprint(config, table));
}

const ScanConfig kConfig{};

}  // namespace

TEST_CASE("event_evidence") {
  const auto& table = testing::truth_table();
  const auto& bg = testing::library().background;
  const auto& cobalt = testing::library().sources.at({4, false});
  const SourceVariantId k{4, false};

  SUBCASE("energies where the source density does not exceed the null give zeros") {
    std::vector<Event> events;
    for (std::size_t i = 0; i < bg.size() && events.size() < 50; i += 7) {
      if (cobalt[i] <= bg[i]) events.push_back({static_cast<double>(events.size()), bg.grid().energy(i)});
    }
    const Run run("r", events);
    const auto r = event_evidence(run, table, k);
    CHECK(r.size() == run.size());
    CHECK(std::ranges::all_of(r, [](double v) { return v == 0.0; }));
  }

  SUBCASE("single event with stored R = 2") {
    const EnergyGrid grid;
    std::vector<double> ratios(grid.n_bins(), 0.0);
    ratios[grid.nearest_bin(662.0)] = 2.0;
    const LogRatioTable t(grid, {{k, ratios}});
    CHECK(event_evidence(Run("r", {{1.0, 662.0}}), t, k) == std::vector<double>{2.0});
  }

  SUBCASE("length matches the event count") {
    const auto run = simulate_run(testing::null_config(3, 40.0), testing::library()).run;
    CHECK(event_evidence(run, table, k).size() == run.size());
  }
}

TEST_CASE("smoothed_score") {
  const std::vector<double> r{3.0};
  CHECK(smoothed_score(r, std::vector<double>{40.0}, 40.0, 0.75, 5.0) == 3.0);
  CHECK(smoothed_score(r, std::vector<double>{41.25}, 40.0, 1.25, 5.0) ==
        doctest::Approx(1.8195919791379003).epsilon(1e-14));
  CHECK(smoothed_score(std::vector<double>{0.0, 0.0}, std::vector<double>{39.0, 40.0}, 40.0, 1.0, 5.0) == 0.0);
  // Beyond the truncation radius the event is skipped.
  CHECK(smoothed_score(r, std::vector<double>{45.01}, 40.0, 1.0, 5.0) == 0.0);
  CHECK(smoothed_score(r, std::vector<double>{45.0}, 40.0, 1.0, 5.0) > 0.0);
  CHECK_THROWS_AS(smoothed_score(r, std::vector<double>{1.0, 2.0}, 40.0, 1.0, 5.0), InvalidInput);
}

TEST_CASE("maximize_over_tau") {
  SUBCASE("single event peaks on its own grid point") {
    const auto m = maximize_over_tau(std::vector<double>{5.0}, std::vector<double>{50.0}, 1.0, kConfig);
    CHECK(m.tau_s == 50.0);
    CHECK(m.s_tilde == 5.0);
  }
  SUBCASE("no evidence: first grid point") {
    const auto m = maximize_over_tau(std::vector<double>(3, 0.0), std::vector<double>{35.0, 50.0, 70.0}, 1.0, kConfig);
    CHECK(m.s_tilde == 0.0);
    CHECK(m.tau_s == 30.0);
  }
  SUBCASE("two symmetric peaks: smallest tau wins") {
    const std::vector<double> r{1.0, 1.0};
    const std::vector<double> t{40.0, 60.0};
    const auto m = maximize_over_tau(r, t, 1.0, kConfig);
    CHECK(m.tau_s == 40.0);
    CHECK(std::abs(m.s_tilde - 1.0) <= 1e-9);
    const auto oracle = brute_force_maximum(r, t, 1.0, kConfig);
    CHECK(oracle.tau_s == 40.0);
  }
  SUBCASE("run ending before tau_min scans the single point tau_min") {
    CHECK(tau_grid(12.0, kConfig) == std::vector<double>{30.0});
    const auto m = maximize_over_tau(std::vector<double>{2.0}, std::vector<double>{29.0}, 1.0, kConfig);
    CHECK(m.tau_s == 30.0);
    CHECK(m.s_tilde == doctest::Approx(2.0 * std::exp(-0.5)));
  }
  SUBCASE("grid reaches the last event time") {
    const auto grid = tau_grid(31.0, kConfig);
    CHECK(grid == std::vector<double>{30.0, 30.25, 30.5, 30.75, 31.0});
  }
}

TEST_CASE("standardize") {
  const auto table = flat_table({{2, false}});
  const std::map<ScanKey, NullStats> entries{{ScanKey{{2, false}, 1.0}, NullStats{4.0, 0.5}},
                                             {ScanKey{{2, false}, 1.5}, NullStats{4.0, kSigmaFloor}}};
  const NullCalibration calib(entries, 10, "x");
  CHECK(standardize(4.0, {2, false}, 1.0, calib) == 0.0);
  CHECK(standardize(5.0, {2, false}, 1.0, calib) == 2.0);
  const double z = standardize(4.5, {2, false}, 1.5, calib);
  CHECK(std::isfinite(z));
  CHECK(z == doctest::Approx(0.5 / kSigmaFloor));
  CHECK_THROWS_AS(standardize(1.0, {2, true}, 1.0, calib), CalibrationMismatch);
  CHECK_THROWS_AS(standardize(1.0, {2, false}, 0.75, calib), CalibrationMismatch);
  CHECK_THROWS_AS(NullCalibration({{ScanKey{{2, false}, 1.0}, NullStats{0.0, 0.0}}}, 2, "x"), InvalidInput);
}

TEST_CASE("scan_run picks the constructed maximum") {
  const auto& table = testing::truth_table();
  const auto run = simulate_run(testing::source_config(21, {4, false}, 44.0, 200.0), testing::library()).run;
  const auto scores = maximized_scores(run, table, kConfig);
  std::map<ScanKey, NullStats> entries;
  for (const auto& [key, max] : scores) {
    const bool target = key.variant == SourceVariantId{4, false} && key.bandwidth_s == 1.0;
    entries.emplace(key, NullStats{max.s_tilde - (target ? 3.26 : 0.0), 1.0});
  }
  const NullCalibration calib(entries, 2, scan_fingerprint(kConfig, table));
  const auto result = scan_run(run, table, calib, kConfig);
  CHECK(result.z_grid.size() == 60);
  CHECK(result.T == doctest::Approx(3.26).epsilon(1e-12));
  REQUIRE(result.k_hat);
  CHECK(*result.k_hat == SourceVariantId{4, false});
  CHECK(*result.tau_hat_s == scores.at(ScanKey{{4, false}, 1.0}).tau_s);
}

TEST_CASE("scan_run tie-break: smaller source, unshielded, smaller bandwidth") {
  const auto table = flat_table({{2, true}, {3, false}, {2, false}});
  const auto calib = unit_calibration(table, kConfig);
  // A single event: every variant has the same evidence, and at the peak every
  // bandwidth scores the same.
  const Run run("tie", {{50.0, 500.0}});
  const auto result = scan_run(run, table, calib, kConfig);
  CHECK(result.T == 1.0);
  CHECK(*result.k_hat == SourceVariantId{2, false});
  CHECK(*result.tau_hat_s == 50.0);
  CHECK(result.z_grid.begin()->first.bandwidth_s == 0.5);
}

TEST_CASE("scan_run is deterministic and internally consistent") {
  const auto& table = testing::truth_table();
  const auto calib = unit_calibration(table, kConfig, 10.0, 3.0);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto run = simulate_run(testing::source_config(seed, all_variants()[seed * 2], 40.0, 150.0),
                                  testing::library()).run;
    const auto a = scan_run(run, table, calib, kConfig);
    const auto b = scan_run(Run(run), table, calib, kConfig);
    CHECK(a.T == b.T);
    CHECK(a.k_hat == b.k_hat);
    CHECK(a.tau_hat_s == b.tau_hat_s);

    double max_z = -1e300;
    for (const auto& [key, e] : a.z_grid) max_z = std::max(max_z, e.z);
    CHECK(a.T == max_z);
    bool attained = false;
    for (const auto& [key, e] : a.z_grid) {
      if (key.variant == *a.k_hat && e.z == a.T && e.tau_k_s == *a.tau_hat_s) attained = true;
    }
    CHECK(attained);
    CHECK(*a.tau_hat_s >= kConfig.tau_min_s);
  }
}

TEST_CASE("scan_run requires a complete calibration") {
  const auto table = flat_table({{1, false}, {2, false}});
  const auto partial = unit_calibration(flat_table({{1, false}}), kConfig);
  CHECK_THROWS_AS(scan_run(Run("r", {{40.0, 100.0}}), table, partial, kConfig), CalibrationMismatch);
}

TEST_CASE("decide") {
  ScanResult r;
  r.T = 2.4;
  r.k_hat = SourceVariantId{3, true};
  r.tau_hat_s = 41.5;
  auto d = decide(r, 2.5);
  CHECK_FALSE(d.source_present);
  CHECK(d.source_id == 0);
  CHECK_FALSE(d.tau_s);

  r.T = 2.5;
  d = decide(r, 2.5);
  CHECK(d.source_present);
  CHECK(d.source_id == 3);
  CHECK(*d.tau_s == 41.5);

  // Raising phi never turns a non-detection into a detection.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(2.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    r.T = n(rng);
    const double lo = n(rng);
    const double hi = lo + std::abs(n(rng));
    if (!decide(r, lo).source_present) REQUIRE_FALSE(decide(r, hi).source_present);
  }
}

TEST_CASE("time-shift equivariance") {
  const auto& table = testing::truth_table();
  const auto calib = unit_calibration(table, kConfig, 5.0, 2.0);
  for (std::uint64_t seed = 30; seed < 33; ++seed) {
    const auto run = simulate_run(testing::source_config(seed, all_variants()[seed % 12], 45.0, 120.0),
                                  testing::library()).run;
    for (double delta : {7.3, 16.0, 101.125}) {
      std::vector<Event> shifted = run.events();
      for (auto& e : shifted) e.time_s += delta;
      ScanConfig cfg = kConfig;
      cfg.tau_min_s += delta;
      const auto a = scan_run(run, table, calib, kConfig);
      const auto b = scan_run(Run(run.id(), shifted), table, calib, cfg);
      CHECK(std::abs(a.T - b.T) <= 1e-9);
      CHECK(a.k_hat == b.k_hat);
      CHECK(std::abs(*a.tau_hat_s + delta - *b.tau_hat_s) <= 1e-9);
      for (const auto& [key, e] : a.z_grid) {
        const auto& f = b.z_grid.at(key);
        REQUIRE(std::abs(e.s_tilde - f.s_tilde) <= 1e-9);
        REQUIRE(std::abs(e.z - f.z) <= 1e-9);
        REQUIRE(std::abs(e.tau_k_s + delta - f.tau_k_s) <= 1e-9);
      }
    }
  }
}

TEST_CASE("appending positive evidence at the argmax never lowers the maximum") {
  const auto& table = testing::truth_table();
  const SourceVariantId k{3, false};
  const auto& iodine = testing::library().sources.at(k);
  // An energy with positive evidence for iodine.
  double energy = 0.0;
  for (std::size_t i = 0; i < iodine.size(); ++i) {
    if (table.ratios().at(k)[i] > 1.0) {
      energy = iodine.grid().energy(i);
      break;
    }
  }
  REQUIRE(energy > 0.0);
  for (std::uint64_t seed = 50; seed < 54; ++seed) {
    const auto run = simulate_run(testing::null_config(seed, 50.0), testing::library()).run;
    const auto times = run.times();
    const auto r = event_evidence(run, table, k);
    for (double h : kConfig.bandwidths_s) {
      const auto before = maximize_over_tau(r, times, h, kConfig);
      auto events = run.events();
      events.push_back({before.tau_s, energy});
      std::stable_sort(events.begin(), events.end(), [](auto& a, auto& b) { return a.time_s < b.time_s; });
      const Run extended(run.id(), events);
      for (double h2 : kConfig.bandwidths_s) {
        const auto old_max = maximize_over_tau(r, times, h2, kConfig);
        const auto new_max = maximize_over_tau(event_evidence(extended, table, k), extended.times(), h2, kConfig);
        REQUIRE(new_max.s_tilde >= old_max.s_tilde);
      }
    }
  }
}

TEST_CASE("scaling evidence leaves the argmax unchanged") {
  const auto& table = testing::truth_table();
  for (std::uint64_t seed = 60; seed < 63; ++seed) {
    const auto run = simulate_run(testing::source_config(seed, {2, false}, 40.0, 100.0), testing::library()).run;
    const auto times = run.times();
    for (const auto& k : all_variants()) {
      const auto r = event_evidence(run, table, k);
      for (double c : {0.5, 2.0, 3.7}) {
        std::vector<double> scaled(r);
        for (auto& v : scaled) v *= c;
        for (double h : kConfig.bandwidths_s) {
          const auto a = maximize_over_tau(r, times, h, kConfig);
          const auto b = maximize_over_tau(scaled, times, h, kConfig);
          REQUIRE(a.tau_s == b.tau_s);
          REQUIRE(b.s_tilde == doctest::Approx(c * a.s_tilde).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("truncated sliding window agrees with the dense untruncated oracle on a long run") {
  const auto& table = testing::truth_table();
  auto cfg = testing::source_config(77, {1, false}, 52.0, 300.0, 100.0);
  const auto run = simulate_run(cfg, testing::library()).run;
  REQUIRE(run.size() >= 9000);
  const auto times = run.times();
  for (const auto& k : {SourceVariantId{1, false}, SourceVariantId{4, true}}) {
    const auto r = event_evidence(run, table, k);
    for (double h : kConfig.bandwidths_s) {
      const auto fast = maximize_over_tau(r, times, h, kConfig);
      const auto dense = brute_force_maximum(r, times, h, kConfig);
      CHECK(std::abs(fast.s_tilde - dense.s_tilde) <= 1e-6 * dense.s_tilde);
      CHECK(fast.tau_s == dense.tau_s);
    }
  }
}

TEST_CASE("run files") {
  const auto dir = std::filesystem::temp_directory_path() / "radscan_test_runs";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "r.csv").string();

  const Run run("r", {{0.5, 100.0}, {0.75, 200.5}, {2.0, 662.0}});
  write_run_csv(run, path);
  CHECK(read_run_csv(path, "r") == run);

  std::ofstream(path) << "time,energy_kev\n500000,100\n250000,200.5\n1250000,662\n";
  const auto decoded = read_run_csv(path, "r", TimeFormat::DeltaMicroseconds);
  REQUIRE(decoded.size() == 3);
  CHECK(decoded.events()[0].time_s == doctest::Approx(0.5));
  CHECK(decoded.events()[1].time_s == doctest::Approx(0.75));
  CHECK(decoded.events()[2].time_s == doctest::Approx(2.0));

  write_run_csv(run, path, TimeFormat::DeltaMicroseconds);
  const auto again = read_run_csv(path, "r", TimeFormat::DeltaMicroseconds);
  for (std::size_t i = 0; i < run.size(); ++i) CHECK(again.events()[i].time_s == doctest::Approx(run.events()[i].time_s));

  std::ofstream(path) << "time,energy_kev\n2,100\n1,200\n";
  CHECK_THROWS_AS(read_run_csv(path, "r"), ParseError);
  std::ofstream(path) << "time,energy_kev\n";
  CHECK_THROWS_AS(read_run_csv(path, "r"), ParseError);
  CHECK_THROWS_AS(Run("x", {{-1.0, 100.0}}), InvalidInput);
  CHECK_THROWS_AS(parse_time_format("hours"), InvalidInput);
}

TEST_CASE("scores csv round-trip") {
  const auto path = (std::filesystem::temp_directory_path() / "radscan_test_scores.csv").string();
  std::vector<ScanResult> results(2);
  results[0].run_id = "a";
  results[0].T = 3.141592653589793;
  results[0].k_hat = SourceVariantId{6, true};
  results[0].tau_hat_s = 47.25;
  results[1].run_id = "b";
  results[1].T = -0.5;
  results[1].k_hat = SourceVariantId{1, false};
  results[1].tau_hat_s = 30.0;
  write_scores_csv(results, path);
  const auto loaded = read_scores_csv(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].T == results[0].T);
  CHECK(loaded[0].k_hat == results[0].k_hat);
  CHECK(loaded[0].tau_hat_s == results[0].tau_hat_s);
  CHECK(loaded[1].k_hat == results[1].k_hat);
}
