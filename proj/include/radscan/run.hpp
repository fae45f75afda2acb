#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radscan/spectra.hpp"

namespace radscan {

struct Event {
  double time_s = 0.0;
  double energy_kev = 0.0;

  friend bool operator==(const Event&, const Event&) = default;
};

// One sensor pass: events ordered by time, times in seconds since the start of the run.
class Run {
 public:
  Run(std::string run_id, std::vector<Event> events);

  const std::string& id() const { return id_; }
  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  double last_time() const { return events_.back().time_s; }

  std::vector<double> times() const;

  friend bool operator==(const Run&, const Run&) = default;

 private:
  std::string id_;
  std::vector<Event> events_;
};

// How the `time` column of a run file is encoded: absolute seconds, or the gap to the
// previous event in microseconds (the first value is measured from the run start).
enum class TimeFormat { Seconds, DeltaMicroseconds };

TimeFormat parse_time_format(const std::string& text);
std::string to_string(TimeFormat format);

// `time,energy_kev`.
Run read_run_csv(const std::string& path, const std::string& run_id, TimeFormat format = TimeFormat::Seconds);
void write_run_csv(const Run& run, const std::string& path, TimeFormat format = TimeFormat::Seconds);

// Parameters of the scan over closest-approach time, source variant and bandwidth.
struct ScanConfig {
  std::vector<double> bandwidths_s{0.5, 0.75, 1.0, 1.25, 1.5};
  double tau_min_s = 30.0;
  double tau_step_s = 0.25;
  double kernel_truncation_sigmas = 5.0;

  // Throws InvalidInput when a parameter is out of range.
  void validate() const;
};

// Binds a scan configuration to the table it scores with; stored in calibration files.
std::string scan_fingerprint(const ScanConfig& config, const LogRatioTable& table);

}  // namespace radscan
