#include "radscan/run.hpp"

#include <algorithm>
#include <cmath>

#include "csv.hpp"
#include "radscan/errors.hpp"

namespace radscan {

Run::Run(std::string run_id, std::vector<Event> events) : id_(std::move(run_id)), events_(std::move(events)) {
  if (events_.empty()) throw InvalidInput("run " + id_ + ": no events");
  double previous = 0.0;
  for (const auto& e : events_) {
    if (!std::isfinite(e.time_s) || !std::isfinite(e.energy_kev)) {
      throw InvalidInput("run " + id_ + ": non-finite event");
    }
    if (e.time_s < previous) {
      throw InvalidInput("run " + id_ + ": event times must be non-negative and non-decreasing");
    }
    previous = e.time_s;
  }
}

std::vector<double> Run::times() const {
  std::vector<double> t(events_.size());
  std::transform(events_.begin(), events_.end(), t.begin(), [](const Event& e) { return e.time_s; });
  return t;
}

TimeFormat parse_time_format(const std::string& text) {
  if (text == "seconds") return TimeFormat::Seconds;
  if (text == "delta-us") return TimeFormat::DeltaMicroseconds;
  throw InvalidInput("unknown time format '" + text + "' (expected seconds or delta-us)");
}

std::string to_string(TimeFormat format) {
  return format == TimeFormat::Seconds ? "seconds" : "delta-us";
}

Run read_run_csv(const std::string& path, const std::string& run_id, TimeFormat format) {
  const auto csv = detail::read_csv(path);
  const auto t_col = csv.column("time");
  const auto e_col = csv.column("energy_kev");
  std::vector<Event> events;
  events.reserve(csv.rows.size());
  double elapsed_us = 0.0;
  for (const auto& row : csv.rows) {
    const double t = detail::parse_double(row[t_col], path);
    const double e = detail::parse_double(row[e_col], path);
    if (format == TimeFormat::DeltaMicroseconds) {
      if (t < 0.0) throw ParseError(path + ": negative inter-event delta");
      elapsed_us += t;
      events.push_back({elapsed_us * 1e-6, e});
    } else {
      events.push_back({t, e});
    }
  }
  try {
    return Run(run_id, std::move(events));
  } catch (const InvalidInput& err) {
    throw ParseError(path + ": " + err.what());
  }
}

void write_run_csv(const Run& run, const std::string& path, TimeFormat format) {
  auto out = detail::open_for_write(path);
  out << "time,energy_kev\n";
  double previous = 0.0;
  for (const auto& e : run.events()) {
    const double t = format == TimeFormat::Seconds ? e.time_s : (e.time_s - previous) * 1e6;
    previous = e.time_s;
    out << detail::format_exact(t) << ',' << detail::format_exact(e.energy_kev) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void ScanConfig::validate() const {
  if (bandwidths_s.empty()) throw InvalidInput("scan config: no bandwidths");
  double min_h = bandwidths_s.front();
  for (double h : bandwidths_s) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("scan config: bandwidths must be positive");
    min_h = std::min(min_h, h);
  }
  auto sorted = bandwidths_s;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidInput("scan config: duplicate bandwidth");
  }
  if (!(tau_min_s > 0.0) || !std::isfinite(tau_min_s)) throw InvalidInput("scan config: tau_min_s must be positive");
  if (!(tau_step_s > 0.0)) throw InvalidInput("scan config: tau_step_s must be positive");
  if (tau_step_s > min_h) throw InvalidInput("scan config: tau_step_s exceeds the smallest bandwidth");
  if (!(kernel_truncation_sigmas > 0.0)) throw InvalidInput("scan config: kernel truncation must be positive");
}

std::string scan_fingerprint(const ScanConfig& config, const LogRatioTable& table) {
  detail::Digest digest;
  auto bandwidths = config.bandwidths_s;
  std::sort(bandwidths.begin(), bandwidths.end());
  digest.update(static_cast<std::uint64_t>(bandwidths.size()));
  for (double h : bandwidths) digest.update(h);
  digest.update(config.tau_min_s);
  digest.update(config.tau_step_s);
  digest.update(config.kernel_truncation_sigmas);
  digest.update(table_digest(table));
  return detail::to_hex(digest.value());
}

}  // namespace radscan
