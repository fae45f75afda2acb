#include "radscan/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csv.hpp"
#include "radscan/errors.hpp"
#include "radscan/parallel.hpp"
#include "radscan/scan_engine.hpp"

namespace radscan {

NullCalibration::NullCalibration(std::map<ScanKey, NullStats> entries, std::size_t n_runs,
                                 std::string config_fingerprint)
    : entries_(std::move(entries)), n_runs_(n_runs), fingerprint_(std::move(config_fingerprint)) {
  for (const auto& [key, stats] : entries_) {
    if (!std::isfinite(stats.mu0) || !std::isfinite(stats.sigma0) || stats.sigma0 < kSigmaFloor) {
      throw InvalidInput("calibration: invalid statistics for " + key.variant.to_string() + " h=" +
                         detail::format_6g(key.bandwidth_s));
    }
  }
}

const NullStats& NullCalibration::at(const SourceVariantId& k, double bandwidth_s) const {
  const auto it = entries_.find(ScanKey{k, bandwidth_s});
  if (it == entries_.end()) {
    throw CalibrationMismatch("calibration has no entry for variant " + k.to_string() + " at bandwidth " +
                              detail::format_6g(bandwidth_s));
  }
  return it->second;
}

NullCalibration calibrate_from_scores(std::span<const std::map<ScanKey, double>> per_run_s_tilde,
                                      std::string config_fingerprint) {
  if (per_run_s_tilde.size() < 2) {
    throw InsufficientData("calibration needs at least 2 null runs, got " + std::to_string(per_run_s_tilde.size()));
  }
  std::map<ScanKey, std::vector<double>> samples;
  for (const auto& run_scores : per_run_s_tilde) {
    for (const auto& [key, s] : run_scores) samples[key].push_back(s);
  }
  std::map<ScanKey, NullStats> entries;
  for (auto& [key, values] : samples) {
    if (values.size() != per_run_s_tilde.size()) {
      throw InvalidInput("calibration: runs disagree on the scanned cells");
    }
    // Sorting makes the reduction independent of run order.
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    entries.emplace(key, NullStats{mean, std::max(sd, kSigmaFloor)});
  }
  return NullCalibration(std::move(entries), per_run_s_tilde.size(), std::move(config_fingerprint));
}

NullCalibration calibrate(std::span<const Run> null_runs, const LogRatioTable& table, const ScanConfig& config,
                          unsigned workers) {
  config.validate();
  if (null_runs.size() < 2) {
    throw InsufficientData("calibration needs at least 2 null runs, got " + std::to_string(null_runs.size()));
  }
  std::vector<std::map<ScanKey, double>> scores(null_runs.size());
  parallel_for(null_runs.size(), workers, [&](std::size_t i) {
    for (const auto& [key, max] : maximized_scores(null_runs[i], table, config)) scores[i].emplace(key, max.s_tilde);
  });
  return calibrate_from_scores(scores, scan_fingerprint(config, table));
}

void save_calibration(const NullCalibration& calib, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "# n_runs=" << calib.n_runs() << " fingerprint=" << calib.fingerprint() << '\n';
  out << "source,shielded,bandwidth_s,mu0,sigma0\n";
  for (const auto& [key, stats] : calib.entries()) {
    out << key.variant.source << ',' << (key.variant.shielded ? 1 : 0) << ',' << detail::format_exact(key.bandwidth_s)
        << ',' << detail::format_exact(stats.mu0) << ',' << detail::format_exact(stats.sigma0) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

NullCalibration load_calibration(const std::string& path, const std::string& expected_fingerprint) {
  const auto csv = detail::read_csv(path);
  std::size_t n_runs = 0;
  std::string fingerprint;
  bool have_meta = false;
  for (const auto& comment : csv.comments) {
    std::istringstream in(comment.substr(1));
    std::string token;
    while (in >> token) {
      if (token.rfind("n_runs=", 0) == 0) {
        n_runs = static_cast<std::size_t>(detail::parse_int(token.substr(7), path));
        have_meta = true;
      } else if (token.rfind("fingerprint=", 0) == 0) {
        fingerprint = token.substr(12);
      }
    }
  }
  if (!have_meta || fingerprint.empty()) throw ParseError(path + ": missing n_runs/fingerprint comment line");

  const auto s_col = csv.column("source");
  const auto sh_col = csv.column("shielded");
  const auto h_col = csv.column("bandwidth_s");
  const auto mu_col = csv.column("mu0");
  const auto sd_col = csv.column("sigma0");
  std::map<ScanKey, NullStats> entries;
  for (const auto& row : csv.rows) {
    const auto source = detail::parse_int(row[s_col], path);
    const auto shielded = detail::parse_int(row[sh_col], path);
    if (source < 1 || source > kNumSources || (shielded != 0 && shielded != 1)) {
      throw ParseError(path + ": invalid source variant " + row[s_col] + "," + row[sh_col]);
    }
    const ScanKey key{SourceVariantId{static_cast<int>(source), shielded == 1},
                      detail::parse_double(row[h_col], path)};
    const NullStats stats{detail::parse_double(row[mu_col], path), detail::parse_double(row[sd_col], path)};
    if (!(stats.sigma0 >= kSigmaFloor) || !std::isfinite(stats.sigma0) || !std::isfinite(stats.mu0)) {
      throw ParseError(path + ": sigma0 must be finite and at least " + detail::format_6g(kSigmaFloor));
    }
    if (!entries.emplace(key, stats).second) throw ParseError(path + ": duplicate calibration entry");
  }
  if (entries.empty()) throw ParseError(path + ": no calibration entries");
  if (!expected_fingerprint.empty() && fingerprint != expected_fingerprint) {
    throw CalibrationMismatch(path + ": calibration fingerprint " + fingerprint +
                              " does not match the active scan configuration and tables (" + expected_fingerprint +
                              ")");
  }
  return NullCalibration(std::move(entries), n_runs, fingerprint);
}

}  // namespace radscan
