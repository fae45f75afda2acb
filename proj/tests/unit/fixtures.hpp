#pragma once

// Shared test fixtures: the synthetic spectrum library and a log-ratio table built
// against its true background density. Built once per test binary.

#include <random>
#include <vector>

#include "radscan/scan_engine.hpp"
#include "radscan/simulator.hpp"
#include "radscan/synthetic_spectra.hpp"

namespace radscan::testing {

inline const SpectrumLibrary& library() {
  static const SpectrumLibrary lib = make_spectrum_library(make_synthetic_spectra());
  return lib;
}

inline const LogRatioTable& truth_table() {
  static const LogRatioTable table = build_log_ratio_table(library().sources, library().background);
  return table;
}

inline SimConfig null_config(std::uint64_t seed, double duration_s = 60.0, double rate_hz = 100.0) {
  SimConfig c;
  c.run_id = "null_" + std::to_string(seed);
  c.duration_s = duration_s;
  c.background_rate_hz = rate_hz;
  c.seed = seed;
  return c;
}

inline SimConfig source_config(std::uint64_t seed, SourceVariantId k, double tau_s, double expected_events,
                               double duration_s = 60.0, double standoff_s = 1.5) {
  SimConfig c = null_config(seed, duration_s);
  c.run_id = "src_" + std::to_string(seed);
  c.source_variant = k;
  c.tau_true_s = tau_s;
  c.standoff_shape_s = standoff_s;
  c.source_amplitude_hz = amplitude_for_expected_events(expected_events, duration_s, tau_s, standoff_s);
  return c;
}

inline std::vector<Run> null_runs(std::size_t n, std::uint64_t first_seed, double duration_s = 60.0) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < n; ++i) runs.push_back(simulate_run(null_config(first_seed + i, duration_s), library()).run);
  return runs;
}

}  // namespace radscan::testing
