#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radscan/calibration.hpp"
#include "radscan/run.hpp"
#include "radscan/spectra.hpp"

namespace radscan {

// Per-event evidence R_ik for variant k, aligned with run.events().
std::vector<double> event_evidence(const Run& run, const LogRatioTable& table, const SourceVariantId& k);

// Gaussian-weighted evidence around tau:
//   S = sum_i exp(-(t_i - tau)^2 / (2 h^2)) * R_i
// Events with |t_i - tau| > truncation * h are skipped.
double smoothed_score(std::span<const double> evidence, std::span<const double> times, double tau, double h,
                      double truncation);

// Candidate closest-approach times: tau_min, tau_min + step, ... up to the last event
// time. A single point when the run ends before tau_min.
std::vector<double> tau_grid(double last_event_time_s, const ScanConfig& config);

struct TauMaximum {
  double s_tilde = 0.0;
  double tau_s = 0.0;
};

// Maximum of the smoothed score over the tau grid; ties go to the smallest tau.
// `times` must be non-decreasing.
TauMaximum maximize_over_tau(std::span<const double> evidence, std::span<const double> times, double h,
                             const ScanConfig& config);

// Maximized score for every (variant, bandwidth) cell, without standardization.
std::map<ScanKey, TauMaximum> maximized_scores(const Run& run, const LogRatioTable& table, const ScanConfig& config);

// (s_tilde - mu0) / sigma0, with sigma0 floored at kSigmaFloor.
double standardize(double s_tilde, const SourceVariantId& k, double h, const NullCalibration& calib);

struct ZEntry {
  double z = 0.0;
  double s_tilde = 0.0;
  double tau_k_s = 0.0;
};

struct ScanResult {
  std::string run_id;
  double T = 0.0;
  std::optional<SourceVariantId> k_hat;
  std::optional<double> tau_hat_s;
  std::map<ScanKey, ZEntry> z_grid;
};

// Scores one run over every variant in `table` and every configured bandwidth.
// T is the largest Z; ties go to the smaller source, then unshielded, then smaller h.
ScanResult scan_run(const Run& run, const LogRatioTable& table, const NullCalibration& calib,
                    const ScanConfig& config);

struct Decision {
  bool source_present = false;
  int source_id = 0;
  std::optional<double> tau_s;
};

// Source declared iff T >= phi. Shielding is collapsed in the reported source id.
Decision decide(const ScanResult& result, double phi);

// -- output -----------------------------------------------------------------------------

// `run_id,T,k_hat,source_id,tau_hat_s`; source_id is the integer part of k_hat.
void write_scores_csv(std::span<const ScanResult> results, const std::string& path);
std::vector<ScanResult> read_scores_csv(const std::string& path);

// Long form: `run_id,source,shielded,bandwidth_s,z,s_tilde,tau_k_s`.
void write_z_grid_csv(std::span<const ScanResult> results, const std::string& path);

}  // namespace radscan
