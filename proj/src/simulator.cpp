#include "radscan/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <cstdio>

#include "csv.hpp"
#include "radscan/errors.hpp"
#include "radscan/parallel.hpp"

namespace radscan {

EnergySampler::EnergySampler(const Pmf& pmf) : grid_(pmf.grid()), cdf_(pmf.size()) {
  double total = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    total += pmf[i];
    cdf_[i] = total;
  }
  // Absorb rounding so that every u in [0, 1) lands on a bin.
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double EnergySampler::sample(double u_bin, double u_offset) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u_bin);
  const auto bin = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), cdf_.size() - 1));
  const double energy = grid_.energy(bin) + (u_offset - 0.5) * grid_.step_kev();
  return std::clamp(energy, grid_.start_kev(), grid_.end_kev());
}

void SimConfig::validate(double tau_min_s) const {
  if (!(duration_s > tau_min_s) || !std::isfinite(duration_s)) {
    throw InvalidInput("sim config: duration must exceed " + detail::format_6g(tau_min_s) + " s");
  }
  if (!(background_rate_hz >= 0.0) || !(source_amplitude_hz >= 0.0) || !std::isfinite(background_rate_hz) ||
      !std::isfinite(source_amplitude_hz)) {
    throw InvalidInput("sim config: rates must be finite and non-negative");
  }
  if (!(standoff_shape_s > 0.0)) throw InvalidInput("sim config: standoff shape must be positive");
  if (tau_true_s && !(*tau_true_s >= tau_min_s && *tau_true_s <= duration_s)) {
    throw InvalidInput("sim config: closest approach must lie in [" + detail::format_6g(tau_min_s) + ", duration]");
  }
  if (source_amplitude_hz > 0.0) {
    if (!source_variant || !is_valid_variant(*source_variant)) throw InvalidInput("sim config: source needs a variant");
    if (!tau_true_s) throw InvalidInput("sim config: source needs a closest-approach time");
  }
}

double source_rate(double t, double amplitude_hz, double tau_s, double standoff_shape_s) {
  const double c2 = standoff_shape_s * standoff_shape_s;
  const double d = t - tau_s;
  return amplitude_hz * c2 / (c2 + d * d);
}

double expected_source_events(const SimConfig& config) {
  if (!(config.source_amplitude_hz > 0.0) || !config.tau_true_s) return 0.0;
  const double c = config.standoff_shape_s;
  const double tau = *config.tau_true_s;
  return config.source_amplitude_hz * c * (std::atan((config.duration_s - tau) / c) + std::atan(tau / c));
}

double amplitude_for_expected_events(double events, double duration_s, double tau_s, double standoff_shape_s) {
  const double c = standoff_shape_s;
  return events / (c * (std::atan((duration_s - tau_s) / c) + std::atan(tau_s / c)));
}

SimulatedRun simulate_run(const SimConfig& config, const SpectrumLibrary& spectra) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::vector<Event> events;

  const EnergySampler background(spectra.background);
  if (config.background_rate_hz > 0.0) {
    std::exponential_distribution<double> gap(config.background_rate_hz);
    events.reserve(static_cast<std::size_t>(config.background_rate_hz * config.duration_s * 1.1) + 16);
    for (double t = gap(rng); t < config.duration_s; t += gap(rng)) {
      events.push_back({t, background(rng)});
    }
  }

  GroundTruth truth{config.run_id, 0, std::nullopt, std::nullopt};
  if (config.source_amplitude_hz > 0.0) {
    const auto variant = *config.source_variant;
    const auto it = spectra.sources.find(variant);
    if (it == spectra.sources.end()) throw InvalidInput("simulator: no spectrum for variant " + variant.to_string());
    const EnergySampler source(it->second);
    const double tau = *config.tau_true_s;
    // Thinning: candidates at the peak rate, kept with probability rate(t) / peak.
    const double peak = config.source_amplitude_hz;
    std::exponential_distribution<double> gap(peak);
    std::uniform_real_distribution<double> accept(0.0, 1.0);
    for (double t = gap(rng); t < config.duration_s; t += gap(rng)) {
      if (accept(rng) * peak < source_rate(t, peak, tau, config.standoff_shape_s)) {
        events.push_back({t, source(rng)});
      }
    }
    truth = GroundTruth{config.run_id, variant.source, variant.shielded, tau};
  }

  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time_s < b.time_s; });
  if (events.empty()) throw InvalidInput("simulator: run " + config.run_id + " produced no events");
  return SimulatedRun{Run(config.run_id, std::move(events)), std::move(truth)};
}

void BatchConfig::validate() const {
  auto check_range = [](double lo, double hi, const char* what) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi) || lo < 0.0) {
      throw InvalidInput(std::string("batch config: invalid ") + what + " range");
    }
  };
  check_range(duration_min_s, duration_max_s, "duration");
  check_range(background_rate_min_hz, background_rate_max_hz, "background rate");
  check_range(amplitude_min_hz, amplitude_max_hz, "amplitude");
  check_range(standoff_min_s, standoff_max_s, "standoff");
  if (!(standoff_min_s > 0.0)) throw InvalidInput("batch config: standoff must be positive");
  if (!(duration_min_s - tau_end_margin_s >= tau_min_s) || tau_end_margin_s < 0.0) {
    throw InvalidInput("batch config: shortest duration leaves no room for a closest approach");
  }
}

std::uint64_t derive_run_seed(std::uint64_t batch_seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = batch_seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<SimulatedRun> simulate_batch(std::size_t n_null, std::size_t per_source, const BatchConfig& config,
                                         std::uint64_t seed, const SpectrumLibrary& spectra, unsigned workers) {
  config.validate();
  struct Plan {
    std::optional<SourceVariantId> variant;
  };
  std::vector<Plan> plans(n_null);
  for (const auto& k : all_variants()) {
    for (std::size_t j = 0; j < per_source; ++j) plans.push_back({k});
  }

  std::vector<std::optional<SimulatedRun>> out(plans.size());
  parallel_for(plans.size(), workers, [&](std::size_t i) {
    std::mt19937_64 rng(derive_run_seed(seed, i));
    auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * std::generate_canonical<double, 53>(rng); };
    SimConfig sim;
    char id[32];
    std::snprintf(id, sizeof id, "run_%05zu", i);
    sim.run_id = id;
    sim.duration_s = uniform(config.duration_min_s, config.duration_max_s);
    sim.background_rate_hz = uniform(config.background_rate_min_hz, config.background_rate_max_hz);
    sim.standoff_shape_s = uniform(config.standoff_min_s, config.standoff_max_s);
    const double amplitude = uniform(config.amplitude_min_hz, config.amplitude_max_hz);
    const double tau = uniform(config.tau_min_s, sim.duration_s - config.tau_end_margin_s);
    sim.seed = rng();
    if (plans[i].variant) {
      sim.source_variant = plans[i].variant;
      sim.source_amplitude_hz = amplitude;
      sim.tau_true_s = tau;
    }
    out[i] = simulate_run(sim, spectra);
  });

  std::vector<SimulatedRun> runs;
  runs.reserve(out.size());
  for (auto& r : out) runs.push_back(std::move(*r));
  return runs;
}

std::vector<GroundTruth> write_batch(std::span<const SimulatedRun> runs, const std::string& runs_dir,
                                     const std::string& labels_path, TimeFormat format) {
  std::vector<GroundTruth> manifest;
  manifest.reserve(runs.size());
  for (const auto& r : runs) {
    const auto path = (std::filesystem::path(runs_dir) / (r.run.id() + ".csv")).string();
    try {
      write_run_csv(r.run, path, format);
    } catch (const Error& e) {
      throw IoError("writing run " + r.run.id() + ": " + e.what());
    }
    manifest.push_back(r.truth);
  }
  write_labels_csv(manifest, labels_path);
  return manifest;
}

void write_labels_csv(std::span<const GroundTruth> labels, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "run_id,source_id,tau_true_s\n";
  for (const auto& g : labels) {
    out << g.run_id << ',' << g.source_id << ',' << (g.tau_true_s ? detail::format_exact(*g.tau_true_s) : "")
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<GroundTruth> read_labels_csv(const std::string& path) {
  const auto csv = detail::read_csv(path);
  const auto id_col = csv.column("run_id");
  const auto s_col = csv.column("source_id");
  const auto tau_col = csv.column("tau_true_s");
  std::vector<GroundTruth> labels;
  for (const auto& row : csv.rows) {
    GroundTruth g;
    g.run_id = row[id_col];
    const auto source = detail::parse_int(row[s_col], path);
    if (source < 0 || source > kNumSources) throw ParseError(path + ": source_id out of range for " + g.run_id);
    g.source_id = static_cast<int>(source);
    if (!row[tau_col].empty()) g.tau_true_s = detail::parse_double(row[tau_col], path);
    if ((g.source_id == 0) != !g.tau_true_s) {
      throw ParseError(path + ": run " + g.run_id + " must have a closest-approach time iff it has a source");
    }
    labels.push_back(std::move(g));
  }
  return labels;
}

}  // namespace radscan
