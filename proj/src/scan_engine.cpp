#include "radscan/scan_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csv.hpp"
#include "radscan/errors.hpp"

namespace radscan {

namespace {

// Events that carry evidence. Zero-evidence events add exactly nothing to any score,
// so dropping them leaves every sum bit-identical.
struct SparseEvidence {
  std::vector<double> times;
  std::vector<double> values;
};

SparseEvidence sparse_evidence(std::span<const double> evidence, std::span<const double> times) {
  if (evidence.size() != times.size()) throw InvalidInput("evidence and times differ in length");
  SparseEvidence out;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (evidence[i] != 0.0) {
      out.times.push_back(times[i]);
      out.values.push_back(evidence[i]);
    }
  }
  return out;
}

// Sliding-window evaluation of the smoothed score on the tau grid. Both the grid and
// the event times are non-decreasing, so the window bounds only move forward.
TauMaximum maximize_sparse(const SparseEvidence& ev, std::span<const double> grid, double h, double truncation) {
  const double reach = truncation * h;
  const double inv_two_var = 1.0 / (2.0 * h * h);
  const std::size_t n = ev.times.size();
  std::size_t lo = 0;
  std::size_t hi = 0;
  TauMaximum best{-std::numeric_limits<double>::infinity(), grid.front()};
  for (const double tau : grid) {
    while (lo < n && ev.times[lo] < tau - reach) ++lo;
    if (hi < lo) hi = lo;
    while (hi < n && ev.times[hi] <= tau + reach) ++hi;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = ev.times[i] - tau;
      // The window test above uses subtraction on tau; re-check the lag itself so the
      // skip rule matches smoothed_score exactly.
      if (std::abs(d) > reach) continue;
      s += std::exp(-d * d * inv_two_var) * ev.values[i];
    }
    if (s > best.s_tilde) best = {s, tau};
  }
  return best;
}

}  // namespace

std::vector<double> event_evidence(const Run& run, const LogRatioTable& table, const SourceVariantId& k) {
  std::vector<double> r;
  r.reserve(run.size());
  for (const auto& e : run.events()) r.push_back(table.lookup(k, e.energy_kev));
  return r;
}

double smoothed_score(std::span<const double> evidence, std::span<const double> times, double tau, double h,
                      double truncation) {
  if (evidence.size() != times.size()) throw InvalidInput("evidence and times differ in length");
  if (!(h > 0.0)) throw InvalidInput("smoothed score: bandwidth must be positive");
  const double reach = truncation * h;
  const double inv_two_var = 1.0 / (2.0 * h * h);
  double s = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (evidence[i] == 0.0) continue;
    const double d = times[i] - tau;
    if (std::abs(d) > reach) continue;
    s += std::exp(-d * d * inv_two_var) * evidence[i];
  }
  return s;
}

std::vector<double> tau_grid(double last_event_time_s, const ScanConfig& config) {
  std::size_t count = 1;
  if (last_event_time_s > config.tau_min_s) {
    count = static_cast<std::size_t>(std::floor((last_event_time_s - config.tau_min_s) / config.tau_step_s + 1e-9)) + 1;
  }
  std::vector<double> grid(count);
  for (std::size_t j = 0; j < count; ++j) grid[j] = config.tau_min_s + static_cast<double>(j) * config.tau_step_s;
  return grid;
}

TauMaximum maximize_over_tau(std::span<const double> evidence, std::span<const double> times, double h,
                             const ScanConfig& config) {
  if (!(h > 0.0)) throw InvalidInput("maximize_over_tau: bandwidth must be positive");
  if (times.empty()) throw InvalidInput("maximize_over_tau: no events");
  if (!std::is_sorted(times.begin(), times.end())) throw InvalidInput("maximize_over_tau: times must be sorted");
  const auto grid = tau_grid(times.back(), config);
  return maximize_sparse(sparse_evidence(evidence, times), grid, h, config.kernel_truncation_sigmas);
}

std::map<ScanKey, TauMaximum> maximized_scores(const Run& run, const LogRatioTable& table, const ScanConfig& config) {
  config.validate();
  const auto times = run.times();
  const auto grid = tau_grid(run.last_time(), config);
  std::map<ScanKey, TauMaximum> out;
  for (const auto& k : table.variants()) {
    const auto sparse = sparse_evidence(event_evidence(run, table, k), times);
    for (double h : config.bandwidths_s) {
      out.emplace(ScanKey{k, h}, maximize_sparse(sparse, grid, h, config.kernel_truncation_sigmas));
    }
  }
  return out;
}

double standardize(double s_tilde, const SourceVariantId& k, double h, const NullCalibration& calib) {
  const auto& stats = calib.at(k, h);
  return (s_tilde - stats.mu0) / std::max(stats.sigma0, kSigmaFloor);
}

ScanResult scan_run(const Run& run, const LogRatioTable& table, const NullCalibration& calib,
                    const ScanConfig& config) {
  if (table.ratios().empty()) throw InvalidInput("scan_run: log-ratio table holds no variants");
  ScanResult result;
  result.run_id = run.id();
  bool first = true;
  for (const auto& [key, max] : maximized_scores(run, table, config)) {
    const double z = standardize(max.s_tilde, key.variant, key.bandwidth_s, calib);
    result.z_grid.emplace(key, ZEntry{z, max.s_tilde, max.tau_s});
    // Map order is the tie-break order, so only a strictly larger Z replaces the leader.
    if (first || z > result.T) {
      result.T = z;
      result.k_hat = key.variant;
      result.tau_hat_s = max.tau_s;
      first = false;
    }
  }
  return result;
}

Decision decide(const ScanResult& result, double phi) {
  Decision d;
  if (result.T >= phi && result.k_hat) {
    d.source_present = true;
    d.source_id = result.k_hat->source;
    d.tau_s = result.tau_hat_s;
  }
  return d;
}

void write_scores_csv(std::span<const ScanResult> results, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "run_id,T,k_hat,source_id,tau_hat_s\n";
  for (const auto& r : results) {
    out << r.run_id << ',' << detail::format_exact(r.T) << ',' << (r.k_hat ? r.k_hat->to_string() : "") << ','
        << (r.k_hat ? r.k_hat->source : 0) << ',' << (r.tau_hat_s ? detail::format_exact(*r.tau_hat_s) : "")
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ScanResult> read_scores_csv(const std::string& path) {
  const auto csv = detail::read_csv(path);
  const auto id_col = csv.column("run_id");
  const auto t_col = csv.column("T");
  const auto k_col = csv.column("k_hat");
  const auto tau_col = csv.column("tau_hat_s");
  std::vector<ScanResult> results;
  for (const auto& row : csv.rows) {
    ScanResult r;
    r.run_id = row[id_col];
    r.T = detail::parse_double(row[t_col], path);
    if (!row[k_col].empty()) r.k_hat = SourceVariantId::parse(row[k_col]);
    if (!row[tau_col].empty()) r.tau_hat_s = detail::parse_double(row[tau_col], path);
    results.push_back(std::move(r));
  }
  return results;
}

void write_z_grid_csv(std::span<const ScanResult> results, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "run_id,source,shielded,bandwidth_s,z,s_tilde,tau_k_s\n";
  for (const auto& r : results) {
    for (const auto& [key, entry] : r.z_grid) {
      out << r.run_id << ',' << key.variant.source << ',' << (key.variant.shielded ? 1 : 0) << ','
          << detail::format_exact(key.bandwidth_s) << ',' << detail::format_exact(entry.z) << ','
          << detail::format_exact(entry.s_tilde) << ',' << detail::format_exact(entry.tau_k_s) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace radscan
