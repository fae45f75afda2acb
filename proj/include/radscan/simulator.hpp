#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "radscan/run.hpp"
#include "radscan/spectra.hpp"

namespace radscan {

// Energy densities the simulator draws from: the background and one pmf per variant.
struct SpectrumLibrary {
  Pmf background;
  std::map<SourceVariantId, Pmf> sources;
};

// Draws energies from a pmf: a bin by inverse CDF, then a uniform offset within half a
// grid step of the bin's energy, kept inside the grid.
class EnergySampler {
 public:
  explicit EnergySampler(const Pmf& pmf);

  template <typename Rng>
  double operator()(Rng& rng) const;

 private:
  double sample(double u_bin, double u_offset) const;

  EnergyGrid grid_;
  std::vector<double> cdf_;
};

struct SimConfig {
  std::string run_id = "sim";
  double duration_s = 120.0;
  double background_rate_hz = 100.0;
  double source_amplitude_hz = 0.0;
  std::optional<SourceVariantId> source_variant;
  std::optional<double> tau_true_s;
  double standoff_shape_s = 2.0;
  std::uint64_t seed = 0;

  // InvalidInput when a parameter is out of range. A positive amplitude needs a
  // variant and a closest-approach time in [tau_min_s, duration_s].
  void validate(double tau_min_s = 30.0) const;
};

struct GroundTruth {
  std::string run_id;
  int source_id = 0;
  std::optional<bool> shielded;
  std::optional<double> tau_true_s;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct SimulatedRun {
  Run run;
  GroundTruth truth;
};

// Source event rate of a point source passed at constant speed:
//   amplitude * c^2 / (c^2 + (t - tau)^2).
double source_rate(double t, double amplitude_hz, double tau_s, double standoff_shape_s);

// Integral of source_rate over [0, duration].
double expected_source_events(const SimConfig& config);

// Amplitude that yields `events` expected source events for the config's duration,
// closest-approach time and standoff shape.
double amplitude_for_expected_events(double events, double duration_s, double tau_s, double standoff_shape_s);

// Homogeneous background plus, when the amplitude is positive, a source stream sampled
// by thinning. Deterministic given config.seed. A zero amplitude gives a null run with
// source id 0 whatever variant is configured.
SimulatedRun simulate_run(const SimConfig& config, const SpectrumLibrary& spectra);

// Parameter ranges for batch generation; every run draws its parameters uniformly.
struct BatchConfig {
  double duration_min_s = 90.0;
  double duration_max_s = 120.0;
  double background_rate_min_hz = 80.0;
  double background_rate_max_hz = 120.0;
  double amplitude_min_hz = 20.0;
  double amplitude_max_hz = 60.0;
  double standoff_min_s = 1.0;
  double standoff_max_s = 2.5;
  double tau_min_s = 30.0;
  // Closest approach is drawn from [tau_min_s, duration - tau_end_margin_s].
  double tau_end_margin_s = 10.0;

  void validate() const;
};

// Run-level seed derived from the batch seed and the run's index.
std::uint64_t derive_run_seed(std::uint64_t batch_seed, std::uint64_t index);

// n_null null runs followed by per_source runs of each of the 12 variants, in variant
// order. Run ids are run_00000, run_00001, ...
std::vector<SimulatedRun> simulate_batch(std::size_t n_null, std::size_t per_source, const BatchConfig& config,
                                         std::uint64_t seed, const SpectrumLibrary& spectra, unsigned workers = 1);

// Writes <runs_dir>/<run_id>.csv for every run plus the labels file
// `run_id,source_id,tau_true_s`. Returns the manifest rows in run order.
std::vector<GroundTruth> write_batch(std::span<const SimulatedRun> runs, const std::string& runs_dir,
                                     const std::string& labels_path, TimeFormat format = TimeFormat::Seconds);

void write_labels_csv(std::span<const GroundTruth> labels, const std::string& path);
std::vector<GroundTruth> read_labels_csv(const std::string& path);

// -- implementation ---------------------------------------------------------------------

template <typename Rng>
double EnergySampler::operator()(Rng& rng) const {
  const double u_bin = std::generate_canonical<double, 53>(rng);
  const double u_offset = std::generate_canonical<double, 53>(rng);
  return sample(u_bin, u_offset);
}

}  // namespace radscan
