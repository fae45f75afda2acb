#pragma once

#include <compare>
#include <map>
#include <span>
#include <string>

#include "radscan/run.hpp"
#include "radscan/spectra.hpp"

namespace radscan {

// A (source variant, bandwidth) cell of the scan. Ordered by variant, then bandwidth,
// which is also the tie-break order of the scan maximum.
struct ScanKey {
  SourceVariantId variant;
  double bandwidth_s = 1.0;

  auto operator<=>(const ScanKey&) const = default;
};

struct NullStats {
  double mu0 = 0.0;
  double sigma0 = 1.0;

  friend bool operator==(const NullStats&, const NullStats&) = default;
};

inline constexpr double kSigmaFloor = 1e-9;

// Null mean and standard deviation of the maximized smoothed score for every
// (variant, bandwidth) cell.
class NullCalibration {
 public:
  NullCalibration(std::map<ScanKey, NullStats> entries, std::size_t n_runs, std::string config_fingerprint);

  const std::map<ScanKey, NullStats>& entries() const { return entries_; }
  std::size_t n_runs() const { return n_runs_; }
  const std::string& fingerprint() const { return fingerprint_; }

  // CalibrationMismatch when the cell is missing.
  const NullStats& at(const SourceVariantId& k, double bandwidth_s) const;

  friend bool operator==(const NullCalibration&, const NullCalibration&) = default;

 private:
  std::map<ScanKey, NullStats> entries_;
  std::size_t n_runs_;
  std::string fingerprint_;
};

// Estimates mu0 and sigma0 (n - 1 denominator, floored at kSigmaFloor) from the
// per-run maximized scores of source-free runs. `workers` > 1 scores runs concurrently;
// the result does not depend on it.
NullCalibration calibrate(std::span<const Run> null_runs, const LogRatioTable& table, const ScanConfig& config,
                          unsigned workers = 1);

// Same reduction starting from already computed per-run maximized scores.
NullCalibration calibrate_from_scores(std::span<const std::map<ScanKey, double>> per_run_s_tilde,
                                      std::string config_fingerprint);

// CSV `source,shielded,bandwidth_s,mu0,sigma0` preceded by a comment line
// `# n_runs=<n> fingerprint=<hex>`.
void save_calibration(const NullCalibration& calib, const std::string& path);

// ParseError on malformed content or invalid statistics, CalibrationMismatch when the
// stored fingerprint differs from `expected_fingerprint` (pass an empty string to skip
// the check).
NullCalibration load_calibration(const std::string& path, const std::string& expected_fingerprint);

}  // namespace radscan
