#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace radscan {

// Uniform energy grid in keV. Both ends are inclusive:
// n_bins = floor((end - start) / step) + 1.
class EnergyGrid {
 public:
  EnergyGrid() : EnergyGrid(11.0, 4001.0, 0.5) {}
  EnergyGrid(double start_kev, double end_kev, double step_kev);

  double start_kev() const { return start_; }
  double end_kev() const { return end_; }
  double step_kev() const { return step_; }
  std::size_t n_bins() const { return n_bins_; }

  double energy(std::size_t bin) const { return start_ + static_cast<double>(bin) * step_; }

  // Nearest bin, half-step ties rounding up. Returns n_bins() for energies outside
  // [start, end].
  std::size_t nearest_bin(double energy_kev) const;

  friend bool operator==(const EnergyGrid&, const EnergyGrid&) = default;

 private:
  double start_;
  double end_;
  double step_;
  std::size_t n_bins_;
};

// Count-rate histogram with uniform bins; bin j covers
// [bin_start + j * width, bin_start + (j + 1) * width).
struct IntensityHistogram {
  double bin_start_kev = 11.0;
  double bin_width_kev = 2.0;
  std::vector<double> counts;

  double bin_center(std::size_t j) const {
    return bin_start_kev + (static_cast<double>(j) + 0.5) * bin_width_kev;
  }
};

// Probability mass function over the bins of an EnergyGrid. Always non-negative and
// normalized; the constructor rejects anything else.
class Pmf {
 public:
  Pmf(EnergyGrid grid, std::vector<double> mass);

  // Rescales non-negative weights to sum to one.
  static Pmf from_weights(EnergyGrid grid, std::vector<double> weights);

  const EnergyGrid& grid() const { return grid_; }
  std::span<const double> mass() const { return mass_; }
  double operator[](std::size_t bin) const { return mass_[bin]; }
  std::size_t size() const { return mass_.size(); }

 private:
  EnergyGrid grid_;
  std::vector<double> mass_;
};

// One of the twelve source alternatives: source type 1..6, with or without shielding.
// Ordering is by source, then unshielded before shielded.
struct SourceVariantId {
  int source = 1;
  bool shielded = false;

  auto operator<=>(const SourceVariantId&) const = default;

  // "4.0" for unshielded source 4, "4.1" for shielded.
  std::string to_string() const;
  static SourceVariantId parse(const std::string& text);

  std::size_t index() const { return static_cast<std::size_t>((source - 1) * 2 + (shielded ? 1 : 0)); }
};

inline constexpr int kNumSources = 6;
inline constexpr std::size_t kNumVariants = 12;

bool is_valid_variant(const SourceVariantId& k);
const std::array<SourceVariantId, kNumVariants>& all_variants();

// R_k(x) = max(0, log(f_k(x) / f_0(x))) for every variant and grid bin.
class LogRatioTable {
 public:
  LogRatioTable(EnergyGrid grid, std::map<SourceVariantId, std::vector<double>> ratios);

  const EnergyGrid& grid() const { return grid_; }
  const std::map<SourceVariantId, std::vector<double>>& ratios() const { return ratios_; }
  std::vector<SourceVariantId> variants() const;
  bool contains(const SourceVariantId& k) const { return ratios_.count(k) != 0; }

  // Evidence for variant k at a measured energy. Zero outside the grid and for
  // variants the table does not hold.
  double lookup(const SourceVariantId& k, double energy_kev) const;

  friend bool operator==(const LogRatioTable&, const LogRatioTable&) = default;

 private:
  EnergyGrid grid_;
  std::map<SourceVariantId, std::vector<double>> ratios_;
};

inline constexpr double kDefaultDensityFloor = 1e-12;
inline constexpr double kDefaultNullKdeBandwidthKev = 1.0;
inline constexpr std::size_t kDefaultMinNullReadings = 1000;

// Piecewise-linear interpolation between bin centers, zero beyond the outermost
// centers, rescaled to sum to one over the grid.
Pmf pmf_from_intensity_histogram(const IntensityHistogram& hist, const EnergyGrid& grid);

// Gaussian kernel density estimate evaluated at every grid point and rescaled to a pmf.
Pmf estimate_null_pmf(std::span<const double> energies_kev, const EnergyGrid& grid,
                      double kde_bandwidth_kev = kDefaultNullKdeBandwidthKev,
                      std::size_t min_readings = kDefaultMinNullReadings);

// weight_a * a + (1 - weight_a) * b.
Pmf mix_pmfs(const Pmf& a, const Pmf& b, double weight_a);

LogRatioTable build_log_ratio_table(const std::map<SourceVariantId, Pmf>& sources, const Pmf& null_pmf,
                                    double floor = kDefaultDensityFloor);

inline double lookup_log_ratio(const LogRatioTable& table, const SourceVariantId& k, double energy_kev) {
  return table.lookup(k, energy_kev);
}

// Completes a five-source spectrum set with both source-6 variants, each an even mix of
// sources 1 and 5 with matching shielding.
std::map<SourceVariantId, Pmf> with_source6_mixture(std::map<SourceVariantId, Pmf> sources);

// -- persistence ------------------------------------------------------------------------

// `energy_kev,count_rate`, one row per bin, energy_kev being the bin's lower edge.
IntensityHistogram read_intensity_histogram_csv(const std::string& path);
void write_intensity_histogram_csv(const IntensityHistogram& hist, const std::string& path);

// `energy_kev,value` at every grid point. Values are printed with 17 significant digits.
void write_grid_values_csv(const EnergyGrid& grid, std::span<const double> values, const std::string& path);
Pmf read_pmf_csv(const std::string& path);

// Lossless binary cache of a LogRatioTable.
void save_log_ratio_table(const LogRatioTable& table, const std::string& path);
LogRatioTable load_log_ratio_table(const std::string& path);

// Stable 64-bit digest of the grid and every stored ratio.
std::uint64_t table_digest(const LogRatioTable& table);

}  // namespace radscan
