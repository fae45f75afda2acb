#include "radscan/synthetic_spectra.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace radscan {

namespace {

constexpr double kFirstBinKev = 11.0;
constexpr double kBinWidthKev = 2.0;
constexpr std::size_t kBins = 1995;  // 11 .. 4001 keV

struct Line {
  double energy_kev;
  double intensity;
};

// 7% FWHM at 662 keV, scaling with sqrt(E).
double resolution_sigma(double energy_kev) { return 0.07 * std::sqrt(662.0 * energy_kev) / 2.3548; }

// Fraction of photons absorbed by the detector's low-energy window.
double low_energy_efficiency(double energy_kev) { return 1.0 - std::exp(-(energy_kev - 5.0) / 12.0); }

// Optical depth of the shielding.
double shield_depth(double energy_kev) { return 2.0 * std::pow(100.0 / energy_kev, 2.5) + 0.2; }

double compton_edge(double energy_kev) { return energy_kev * (1.0 - 1.0 / (1.0 + 2.0 * energy_kev / 511.0)); }

class Builder {
 public:
  Builder() : counts_(kBins, 0.0) {}

  void add_peak(double energy_kev, double area) {
    const double sigma = resolution_sigma(energy_kev);
    for (std::size_t j = 0; j < kBins; ++j) {
      const double lo = kFirstBinKev + static_cast<double>(j) * kBinWidthKev;
      const double hi = lo + kBinWidthKev;
      const double mass = 0.5 * (std::erf((hi - energy_kev) / (std::numbers::sqrt2 * sigma)) -
                                 std::erf((lo - energy_kev) / (std::numbers::sqrt2 * sigma)));
      counts_[j] += area * mass;
    }
  }

  // Uniform density over [lo, hi) keV carrying `area` in total.
  void add_flat(double lo_kev, double hi_kev, double area) {
    if (!(hi_kev > lo_kev)) return;
    const double density = area / (hi_kev - lo_kev);
    for (std::size_t j = 0; j < kBins; ++j) {
      const double lo = kFirstBinKev + static_cast<double>(j) * kBinWidthKev;
      const double hi = lo + kBinWidthKev;
      const double overlap = std::max(0.0, std::min(hi, hi_kev) - std::max(lo, lo_kev));
      counts_[j] += density * overlap;
    }
  }

  void add_exponential(double scale, double decay_kev) {
    for (std::size_t j = 0; j < kBins; ++j) {
      const double center = kFirstBinKev + (static_cast<double>(j) + 0.5) * kBinWidthKev;
      counts_[j] += scale * std::exp(-center / decay_kev) * kBinWidthKev;
    }
  }

  // Photopeak plus its Compton continuum. Higher-energy lines lose a larger share of
  // their counts to the continuum.
  void add_line(const Line& line, double transmission = 1.0) {
    const double e = line.energy_kev;
    const double area = line.intensity * transmission;
    const double continuum_ratio = std::min(3.0, e / 300.0);
    add_peak(e, area);
    add_flat(20.0, compton_edge(e), area * continuum_ratio);
    if (transmission < 1.0) {
      // Photons scattered in the shield arrive below the line energy.
      add_flat(30.0, 0.9 * e, line.intensity * (1.0 - transmission) * 0.35);
    }
  }

  IntensityHistogram finish() const {
    IntensityHistogram hist;
    hist.bin_start_kev = kFirstBinKev;
    hist.bin_width_kev = kBinWidthKev;
    hist.counts.resize(kBins);
    for (std::size_t j = 0; j < kBins; ++j) {
      const double center = kFirstBinKev + (static_cast<double>(j) + 0.5) * kBinWidthKev;
      hist.counts[j] = std::max(0.0, counts_[j] * low_energy_efficiency(center));
    }
    return hist;
  }

 private:
  std::vector<double> counts_;
};

IntensityHistogram source_histogram(const std::vector<Line>& lines, bool shielded) {
  Builder b;
  for (const auto& line : lines) {
    b.add_line(line, shielded ? std::exp(-shield_depth(line.energy_kev)) : 1.0);
  }
  return b.finish();
}

const std::vector<Line>& source_lines(int source) {
  static const std::vector<std::vector<Line>> lines = {
      // 1: highly enriched uranium
      {{185.7, 1.0}, {143.8, 0.2}, {163.4, 0.1}, {205.3, 0.1}, {93.0, 0.3}, {1001.0, 0.05}},
      // 2: weapons-grade plutonium
      {{59.5, 0.6}, {413.7, 1.0}, {769.2, 0.3}},
      // 3: iodine-131
      {{364.5, 1.0}, {637.0, 0.1}, {284.3, 0.08}, {722.9, 0.03}},
      // 4: cobalt-60
      {{1173.2, 1.0}, {1332.5, 1.0}},
      // 5: technetium-99m
      {{140.5, 1.0}, {18.4, 0.1}},
  };
  return lines.at(static_cast<std::size_t>(source - 1));
}

}  // namespace

SyntheticSpectra make_synthetic_spectra() {
  SyntheticSpectra out;
  Builder bg;
  bg.add_exponential(40.0, 120.0);
  bg.add_exponential(4.0, 700.0);
  const std::vector<Line> natural = {{1460.8, 1.0},  {609.3, 0.5},  {1120.3, 0.2}, {1764.5, 0.2},
                                     {2614.5, 0.35}, {583.2, 0.25}, {238.6, 0.3},  {511.0, 0.3},
                                     {351.9, 0.25},  {295.2, 0.15}, {75.0, 0.3}};
  for (const auto& line : natural) bg.add_line({line.energy_kev, 400.0 * line.intensity});
  out.background = bg.finish();

  for (int s = 1; s <= 5; ++s) {
    for (bool shielded : {false, true}) {
      out.sources.emplace(SourceVariantId{s, shielded}, source_histogram(source_lines(s), shielded));
    }
  }
  return out;
}

SpectrumLibrary make_spectrum_library(const SyntheticSpectra& spectra, const EnergyGrid& grid) {
  std::map<SourceVariantId, Pmf> sources;
  for (const auto& [k, hist] : spectra.sources) sources.emplace(k, pmf_from_intensity_histogram(hist, grid));
  return SpectrumLibrary{pmf_from_intensity_histogram(spectra.background, grid), with_source6_mixture(std::move(sources))};
}

}  // namespace radscan
