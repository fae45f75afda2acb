#include "radscan/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "csv.hpp"
#include "radscan/errors.hpp"

namespace radscan {

namespace {

constexpr double kMassTolerance = 1e-9;
// Readings farther than this many bandwidths from a grid point are ignored by the KDE;
// the dropped kernel weight is below exp(-50).
constexpr double kKdeCutoffBandwidths = 10.0;

void require_same_grid(const EnergyGrid& a, const EnergyGrid& b, const char* what) {
  if (!(a == b)) throw InvalidInput(std::string(what) + ": energy grids differ");
}

}  // namespace

// -- EnergyGrid -------------------------------------------------------------------------

EnergyGrid::EnergyGrid(double start_kev, double end_kev, double step_kev)
    : start_(start_kev), end_(end_kev), step_(step_kev), n_bins_(0) {
  if (!std::isfinite(start_kev) || !std::isfinite(end_kev) || !std::isfinite(step_kev)) {
    throw InvalidInput("energy grid: non-finite parameter");
  }
  if (!(start_kev < end_kev)) throw InvalidInput("energy grid: start must be below end");
  if (!(step_kev > 0.0)) throw InvalidInput("energy grid: step must be positive");
  // The epsilon keeps an end point that sits exactly on the lattice inside the grid.
  n_bins_ = static_cast<std::size_t>(std::floor((end_kev - start_kev) / step_kev + 1e-9)) + 1;
}

std::size_t EnergyGrid::nearest_bin(double energy_kev) const {
  if (!(energy_kev >= start_ && energy_kev <= end_)) return n_bins_;
  const auto bin = static_cast<std::size_t>(std::floor((energy_kev - start_) / step_ + 0.5));
  return std::min(bin, n_bins_ - 1);
}

// -- Pmf --------------------------------------------------------------------------------

Pmf::Pmf(EnergyGrid grid, std::vector<double> mass) : grid_(grid), mass_(std::move(mass)) {
  if (mass_.size() != grid_.n_bins()) {
    throw InvalidInput("pmf: " + std::to_string(mass_.size()) + " masses for a grid of " +
                       std::to_string(grid_.n_bins()) + " bins");
  }
  double total = 0.0;
  for (double m : mass_) {
    if (!std::isfinite(m) || m < 0.0) throw InvalidInput("pmf: masses must be finite and non-negative");
    total += m;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw InvalidInput("pmf: masses sum to " + detail::format_exact(total));
  }
}

Pmf Pmf::from_weights(EnergyGrid grid, std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidInput("pmf: weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidInput("pmf: all weights are zero");
  for (double& w : weights) w /= total;
  return Pmf(grid, std::move(weights));
}

// -- SourceVariantId --------------------------------------------------------------------

std::string SourceVariantId::to_string() const {
  return std::to_string(source) + (shielded ? ".1" : ".0");
}

SourceVariantId SourceVariantId::parse(const std::string& text) {
  const std::string t = detail::trim(text);
  if (t.size() == 3 && t[1] == '.' && t[0] >= '1' && t[0] <= '6' && (t[2] == '0' || t[2] == '1')) {
    return SourceVariantId{t[0] - '0', t[2] == '1'};
  }
  throw ParseError("invalid source variant '" + t + "' (expected e.g. 4.0 or 4.1)");
}

bool is_valid_variant(const SourceVariantId& k) { return k.source >= 1 && k.source <= kNumSources; }

const std::array<SourceVariantId, kNumVariants>& all_variants() {
  static const auto variants = [] {
    std::array<SourceVariantId, kNumVariants> v{};
    for (std::size_t i = 0; i < kNumVariants; ++i) {
      v[i] = SourceVariantId{static_cast<int>(i / 2) + 1, i % 2 == 1};
    }
    return v;
  }();
  return variants;
}

// -- LogRatioTable ----------------------------------------------------------------------

LogRatioTable::LogRatioTable(EnergyGrid grid, std::map<SourceVariantId, std::vector<double>> ratios)
    : grid_(grid), ratios_(std::move(ratios)) {
  for (const auto& [k, values] : ratios_) {
    if (!is_valid_variant(k)) throw InvalidInput("log-ratio table: invalid variant " + k.to_string());
    if (values.size() != grid_.n_bins()) {
      throw InvalidInput("log-ratio table: variant " + k.to_string() + " has wrong length");
    }
    for (double r : values) {
      if (!std::isfinite(r) || r < 0.0) {
        throw InvalidInput("log-ratio table: entries must be finite and non-negative");
      }
    }
  }
}

std::vector<SourceVariantId> LogRatioTable::variants() const {
  std::vector<SourceVariantId> out;
  out.reserve(ratios_.size());
  for (const auto& entry : ratios_) out.push_back(entry.first);
  return out;
}

double LogRatioTable::lookup(const SourceVariantId& k, double energy_kev) const {
  const std::size_t bin = grid_.nearest_bin(energy_kev);
  if (bin >= grid_.n_bins()) return 0.0;
  const auto it = ratios_.find(k);
  if (it == ratios_.end()) return 0.0;
  return it->second[bin];
}

// -- density construction ---------------------------------------------------------------

Pmf pmf_from_intensity_histogram(const IntensityHistogram& hist, const EnergyGrid& grid) {
  const auto& counts = hist.counts;
  if (counts.empty()) throw InvalidInput("intensity histogram: no bins");
  if (!(hist.bin_width_kev > 0.0)) throw InvalidInput("intensity histogram: bin width must be positive");
  bool any_positive = false;
  for (double c : counts) {
    if (!std::isfinite(c) || c < 0.0) throw InvalidInput("intensity histogram: counts must be non-negative");
    any_positive = any_positive || c > 0.0;
  }
  if (!any_positive) throw InvalidInput("intensity histogram: all counts are zero");

  const double span_lo = hist.bin_start_kev;
  const double span_hi = hist.bin_start_kev + static_cast<double>(counts.size()) * hist.bin_width_kev;
  if (span_hi < grid.start_kev() || span_lo > grid.end_kev()) {
    throw InvalidInput("intensity histogram: does not overlap the energy grid");
  }

  const double first_center = hist.bin_center(0);
  const double last_center = hist.bin_center(counts.size() - 1);
  std::vector<double> weights(grid.n_bins(), 0.0);
  for (std::size_t i = 0; i < grid.n_bins(); ++i) {
    const double x = grid.energy(i);
    if (x < first_center || x > last_center) continue;
    const double u = (x - first_center) / hist.bin_width_kev;
    auto j = static_cast<std::size_t>(std::floor(u));
    if (j >= counts.size() - 1) {
      weights[i] = counts.back();
      continue;
    }
    const double frac = u - static_cast<double>(j);
    weights[i] = std::max(0.0, counts[j] + frac * (counts[j + 1] - counts[j]));
  }
  if (std::none_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; })) {
    throw InvalidInput("intensity histogram: no positive mass falls on the energy grid");
  }
  return Pmf::from_weights(grid, std::move(weights));
}

Pmf estimate_null_pmf(std::span<const double> energies_kev, const EnergyGrid& grid, double kde_bandwidth_kev,
                      std::size_t min_readings) {
  if (energies_kev.empty() || energies_kev.size() < min_readings) {
    throw InsufficientData("null density: " + std::to_string(energies_kev.size()) + " readings, need at least " +
                           std::to_string(std::max<std::size_t>(min_readings, 1)));
  }
  if (!(kde_bandwidth_kev > 0.0)) throw InvalidInput("null density: KDE bandwidth must be positive");

  // Sorting fixes the summation order, so the estimate does not depend on input order.
  std::vector<double> sorted(energies_kev.begin(), energies_kev.end());
  for (double e : sorted) {
    if (!std::isfinite(e)) throw InvalidInput("null density: non-finite energy reading");
  }
  std::sort(sorted.begin(), sorted.end());

  const double cutoff = kKdeCutoffBandwidths * kde_bandwidth_kev;
  const double inv_two_var = 1.0 / (2.0 * kde_bandwidth_kev * kde_bandwidth_kev);
  std::vector<double> density(grid.n_bins(), 0.0);
  for (std::size_t i = 0; i < grid.n_bins(); ++i) {
    const double x = grid.energy(i);
    auto it = std::lower_bound(sorted.begin(), sorted.end(), x - cutoff);
    double sum = 0.0;
    for (; it != sorted.end() && *it <= x + cutoff; ++it) {
      const double d = x - *it;
      sum += std::exp(-d * d * inv_two_var);
    }
    density[i] = sum;
  }
  if (std::none_of(density.begin(), density.end(), [](double d) { return d > 0.0; })) {
    throw InsufficientData("null density: no readings near the energy grid");
  }
  return Pmf::from_weights(grid, std::move(density));
}

Pmf mix_pmfs(const Pmf& a, const Pmf& b, double weight_a) {
  require_same_grid(a.grid(), b.grid(), "mix_pmfs");
  if (!(weight_a >= 0.0 && weight_a <= 1.0)) throw InvalidInput("mix_pmfs: weight must lie in [0, 1]");
  const double weight_b = 1.0 - weight_a;
  std::vector<double> mass(a.size());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = weight_a * a[i] + weight_b * b[i];
  return Pmf(a.grid(), std::move(mass));
}

LogRatioTable build_log_ratio_table(const std::map<SourceVariantId, Pmf>& sources, const Pmf& null_pmf,
                                    double floor) {
  if (!(floor > 0.0)) throw InvalidInput("log-ratio table: density floor must be positive");
  std::map<SourceVariantId, std::vector<double>> ratios;
  for (const auto& [k, pmf] : sources) {
    require_same_grid(pmf.grid(), null_pmf.grid(), "log-ratio table");
    std::vector<double> r(pmf.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = std::max(0.0, std::log(std::max(pmf[i], floor) / std::max(null_pmf[i], floor)));
    }
    ratios.emplace(k, std::move(r));
  }
  return LogRatioTable(null_pmf.grid(), std::move(ratios));
}

std::map<SourceVariantId, Pmf> with_source6_mixture(std::map<SourceVariantId, Pmf> sources) {
  for (bool shielded : {false, true}) {
    const SourceVariantId heu{1, shielded};
    const SourceVariantId tc{5, shielded};
    if (!sources.count(heu) || !sources.count(tc)) {
      throw InvalidInput("source 6 mixture needs sources 1 and 5 (" + std::string(shielded ? "shielded" : "unshielded") +
                         ")");
    }
    sources.insert_or_assign(SourceVariantId{6, shielded}, mix_pmfs(sources.at(heu), sources.at(tc), 0.5));
  }
  return sources;
}

// -- persistence ------------------------------------------------------------------------

IntensityHistogram read_intensity_histogram_csv(const std::string& path) {
  const auto csv = detail::read_csv(path);
  const auto e_col = csv.column("energy_kev");
  const auto c_col = csv.column("count_rate");
  if (csv.rows.empty()) throw ParseError(path + ": no histogram rows");
  IntensityHistogram hist;
  std::vector<double> edges;
  for (const auto& row : csv.rows) {
    edges.push_back(detail::parse_double(row[e_col], path));
    hist.counts.push_back(detail::parse_double(row[c_col], path));
  }
  hist.bin_start_kev = edges.front();
  if (edges.size() > 1) {
    hist.bin_width_kev = edges[1] - edges[0];
    for (std::size_t j = 1; j < edges.size(); ++j) {
      const double expected = hist.bin_start_kev + static_cast<double>(j) * hist.bin_width_kev;
      if (std::abs(edges[j] - expected) > 1e-6 * std::max(1.0, std::abs(expected))) {
        throw ParseError(path + ": histogram bins are not uniformly spaced");
      }
    }
  }
  if (!(hist.bin_width_kev > 0.0)) throw ParseError(path + ": histogram energies must increase");
  return hist;
}

void write_intensity_histogram_csv(const IntensityHistogram& hist, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "energy_kev,count_rate\n";
  for (std::size_t j = 0; j < hist.counts.size(); ++j) {
    out << detail::format_exact(hist.bin_start_kev + static_cast<double>(j) * hist.bin_width_kev) << ','
        << detail::format_exact(hist.counts[j]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_grid_values_csv(const EnergyGrid& grid, std::span<const double> values, const std::string& path) {
  if (values.size() != grid.n_bins()) throw InvalidInput("grid values: length does not match grid");
  auto out = detail::open_for_write(path);
  out << "energy_kev,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << detail::format_exact(grid.energy(i)) << ',' << detail::format_exact(values[i]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Pmf read_pmf_csv(const std::string& path) {
  const auto csv = detail::read_csv(path);
  const auto e_col = csv.column("energy_kev");
  const auto v_col = csv.column("value");
  if (csv.rows.size() < 2) throw ParseError(path + ": a pmf needs at least two grid points");
  std::vector<double> energies;
  std::vector<double> values;
  for (const auto& row : csv.rows) {
    energies.push_back(detail::parse_double(row[e_col], path));
    values.push_back(detail::parse_double(row[v_col], path));
  }
  const double step = energies[1] - energies[0];
  const EnergyGrid grid(energies.front(), energies.back(), step);
  if (grid.n_bins() != energies.size()) throw ParseError(path + ": energies do not form a uniform grid");
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (std::abs(energies[i] - grid.energy(i)) > 1e-6) throw ParseError(path + ": energies do not form a uniform grid");
  }
  try {
    return Pmf(grid, std::move(values));
  } catch (const InvalidInput& e) {
    throw ParseError(path + ": " + e.what());
  }
}

namespace {

constexpr char kTableMagic[8] = {'R', 'S', 'C', 'N', 'L', 'R', 'T', '1'};

template <typename T>
void put(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw ParseError(path + ": truncated log-ratio table");
  return value;
}

}  // namespace

void save_log_ratio_table(const LogRatioTable& table, const std::string& path) {
  auto out = detail::open_for_write(path);
  out.write(kTableMagic, sizeof kTableMagic);
  put(out, table.grid().start_kev());
  put(out, table.grid().end_kev());
  put(out, table.grid().step_kev());
  put(out, static_cast<std::uint64_t>(table.grid().n_bins()));
  put(out, static_cast<std::uint64_t>(table.ratios().size()));
  for (const auto& [k, values] : table.ratios()) {
    put(out, static_cast<std::int32_t>(k.source));
    put(out, static_cast<std::uint8_t>(k.shielded ? 1 : 0));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path);
}

LogRatioTable load_log_ratio_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[sizeof kTableMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kTableMagic, sizeof magic) != 0) {
    throw ParseError(path + ": not a log-ratio table file");
  }
  const auto start = get<double>(in, path);
  const auto end = get<double>(in, path);
  const auto step = get<double>(in, path);
  const auto n_bins = get<std::uint64_t>(in, path);
  const auto n_variants = get<std::uint64_t>(in, path);
  try {
    const EnergyGrid grid(start, end, step);
    if (grid.n_bins() != n_bins) throw ParseError(path + ": bin count does not match grid");
    if (n_variants > kNumVariants) throw ParseError(path + ": too many variants");
    std::map<SourceVariantId, std::vector<double>> ratios;
    for (std::uint64_t v = 0; v < n_variants; ++v) {
      SourceVariantId k{get<std::int32_t>(in, path), get<std::uint8_t>(in, path) != 0};
      std::vector<double> values(n_bins);
      in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n_bins * sizeof(double)));
      if (!in) throw ParseError(path + ": truncated log-ratio table");
      ratios.emplace(k, std::move(values));
    }
    return LogRatioTable(grid, std::move(ratios));
  } catch (const InvalidInput& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::uint64_t table_digest(const LogRatioTable& table) {
  detail::Digest digest;
  digest.update(table.grid().start_kev());
  digest.update(table.grid().end_kev());
  digest.update(table.grid().step_kev());
  for (const auto& [k, values] : table.ratios()) {
    digest.update(k.to_string());
    digest.update(values.data(), values.size() * sizeof(double));
  }
  return digest.value();
}

}  // namespace radscan
