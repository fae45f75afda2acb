#include "radscan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "csv.hpp"
#include "radscan/errors.hpp"

namespace radscan {

namespace {

int estimated_source(const ScanResult& r, double phi) { return decide(r, phi).source_id; }

double ratio_or(std::size_t num, std::size_t den, double fallback) {
  return den == 0 ? fallback : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::vector<LabeledOutcome> join_outcomes(std::span<const GroundTruth> labels, std::span<const ScanResult> results) {
  std::map<std::string, const ScanResult*> by_id;
  for (const auto& r : results) {
    if (!by_id.emplace(r.run_id, &r).second) throw InvalidInput("duplicate scored run id " + r.run_id);
  }
  std::set<std::string> label_ids;
  std::vector<std::string> orphans;
  std::vector<LabeledOutcome> out;
  for (const auto& g : labels) {
    if (!label_ids.insert(g.run_id).second) throw InvalidInput("duplicate labelled run id " + g.run_id);
    const auto it = by_id.find(g.run_id);
    if (it == by_id.end()) {
      orphans.push_back(g.run_id + " (label without score)");
      continue;
    }
    out.push_back({g, *it->second});
  }
  for (const auto& r : results) {
    if (!label_ids.count(r.run_id)) orphans.push_back(r.run_id + " (score without label)");
  }
  if (!orphans.empty()) {
    std::string msg = "scores and labels disagree on " + std::to_string(orphans.size()) + " run(s):";
    for (const auto& o : orphans) msg += "\n  " + o;
    throw InvalidInput(msg);
  }
  return out;
}

std::array<std::size_t, kNumClasses> ConfusionMatrix::row_totals() const {
  std::array<std::size_t, kNumClasses> totals{};
  for (std::size_t i = 0; i < kNumClasses; ++i) totals[i] = std::accumulate(counts[i].begin(), counts[i].end(), 0ULL);
  return totals;
}

std::array<std::size_t, kNumClasses> ConfusionMatrix::column_totals() const {
  std::array<std::size_t, kNumClasses> totals{};
  for (const auto& row : counts) {
    for (std::size_t j = 0; j < kNumClasses; ++j) totals[j] += row[j];
  }
  return totals;
}

std::size_t ConfusionMatrix::total() const {
  const auto rows = row_totals();
  return std::accumulate(rows.begin(), rows.end(), 0ULL);
}

double ConfusionMatrix::id_accuracy_detected() const {
  std::size_t correct = 0;
  std::size_t detected = 0;
  for (std::size_t i = 1; i < kNumClasses; ++i) {
    correct += counts[i][i];
    for (std::size_t j = 1; j < kNumClasses; ++j) detected += counts[i][j];
  }
  return ratio_or(correct, detected, 1.0);
}

double ConfusionMatrix::id_accuracy_all_sources() const {
  std::size_t correct = 0;
  std::size_t sources = 0;
  const auto rows = row_totals();
  for (std::size_t i = 1; i < kNumClasses; ++i) {
    correct += counts[i][i];
    sources += rows[i];
  }
  return ratio_or(correct, sources, 0.0);
}

ConfusionMatrix confusion_matrix(std::span<const LabeledOutcome> outcomes, double phi) {
  if (outcomes.empty()) throw InvalidInput("confusion matrix: no outcomes");
  ConfusionMatrix m;
  m.phi = phi;
  for (const auto& o : outcomes) {
    const auto truth = static_cast<std::size_t>(o.truth.source_id);
    const auto est = static_cast<std::size_t>(estimated_source(o.result, phi));
    if (truth >= kNumClasses) throw InvalidInput("confusion matrix: true source out of range");
    ++m.counts[truth][est];
  }
  return m;
}

std::vector<double> localization_distances(std::span<const LabeledOutcome> outcomes, double phi) {
  std::vector<double> d;
  for (const auto& o : outcomes) {
    if (o.truth.source_id == 0 || !o.truth.tau_true_s) continue;
    const auto decision = decide(o.result, phi);
    if (!decision.source_present || !decision.tau_s) continue;
    d.push_back(std::abs(*o.truth.tau_true_s - *decision.tau_s));
  }
  return d;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidInput("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

LocalizationStats summarize_distances(std::span<const double> distances) {
  LocalizationStats s;
  s.count = distances.size();
  if (distances.empty()) return s;
  std::vector<double> v(distances.begin(), distances.end());
  s.mean_s = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median_s = quantile(v, 0.5);
  s.p95_s = quantile(std::move(v), 0.95);
  return s;
}

std::vector<ThresholdMetrics> metrics_over_thresholds(std::span<const LabeledOutcome> outcomes,
                                                      std::span<const double> phis) {
  if (phis.empty()) throw InvalidInput("metrics: no thresholds");
  std::vector<ThresholdMetrics> out;
  out.reserve(phis.size());
  for (const double phi : phis) {
    ThresholdMetrics m;
    m.phi = phi;
    std::size_t correct = 0;
    for (const auto& o : outcomes) {
      const bool positive = o.truth.source_id != 0;
      const auto decision = decide(o.result, phi);
      if (positive && decision.source_present) {
        ++m.tp;
        if (decision.source_id == o.truth.source_id) ++correct;
      } else if (positive) {
        ++m.fn;
      } else if (decision.source_present) {
        ++m.fp;
      } else {
        ++m.tn;
      }
    }
    m.tpr = ratio_or(m.tp, m.tp + m.fn, 0.0);
    m.fpr = ratio_or(m.fp, m.fp + m.tn, 0.0);
    m.precision = ratio_or(m.tp, m.tp + m.fp, 1.0);
    m.id_accuracy = ratio_or(correct, m.tp, 1.0);
    m.id_accuracy_all_sources = ratio_or(correct, m.tp + m.fn, 0.0);
    m.localization = summarize_distances(localization_distances(outcomes, phi));
    out.push_back(m);
  }
  return out;
}

double roc_auc(std::span<const LabeledOutcome> outcomes) {
  std::vector<double> pos;
  std::vector<double> neg;
  for (const auto& o : outcomes) (o.truth.source_id != 0 ? pos : neg).push_back(o.result.T);
  if (pos.empty() || neg.empty()) throw InvalidInput("roc_auc needs both source and null runs");
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (const double t : pos) {
    const auto below = std::lower_bound(neg.begin(), neg.end(), t) - neg.begin();
    const auto not_above = std::upper_bound(neg.begin(), neg.end(), t) - neg.begin();
    wins += static_cast<double>(below) + 0.5 * static_cast<double>(not_above - below);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

std::string phi_label(double phi) { return detail::format_6g(phi); }

void write_metrics_csv(std::span<const ThresholdMetrics> metrics, const std::string& path) {
  using detail::format_6g;
  auto out = detail::open_for_write(path);
  out << "phi,tp,fp,tn,fn,tpr,fpr,precision,id_accuracy_detected,id_accuracy_all_sources,"
         "n_localized,loc_median_s,loc_mean_s,loc_p95_s\n";
  for (const auto& m : metrics) {
    out << format_6g(m.phi) << ',' << m.tp << ',' << m.fp << ',' << m.tn << ',' << m.fn << ',' << format_6g(m.tpr)
        << ',' << format_6g(m.fpr) << ',' << format_6g(m.precision) << ',' << format_6g(m.id_accuracy) << ','
        << format_6g(m.id_accuracy_all_sources) << ',' << m.localization.count << ','
        << format_6g(m.localization.median_s) << ',' << format_6g(m.localization.mean_s) << ','
        << format_6g(m.localization.p95_s) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_confusion_csv(const ConfusionMatrix& matrix, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "true_source";
  for (std::size_t j = 0; j < kNumClasses; ++j) out << ",est_" << j;
  out << ",total\n";
  const auto rows = matrix.row_totals();
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out << i;
    for (std::size_t j = 0; j < kNumClasses; ++j) out << ',' << matrix.counts[i][j];
    out << ',' << rows[i] << '\n';
  }
  out << "total";
  for (const auto c : matrix.column_totals()) out << ',' << c;
  out << ',' << matrix.total() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

void write_localization_csv(std::span<const LabeledOutcome> outcomes, double phi, const std::string& path) {
  using detail::format_6g;
  auto out = detail::open_for_write(path);
  out << "run_id,true_source,tau_true_s,tau_hat_s,distance_s\n";
  for (const auto& o : outcomes) {
    if (o.truth.source_id == 0 || !o.truth.tau_true_s) continue;
    const auto decision = decide(o.result, phi);
    if (!decision.source_present || !decision.tau_s) continue;
    out << o.truth.run_id << ',' << o.truth.source_id << ',' << format_6g(*o.truth.tau_true_s) << ','
        << format_6g(*decision.tau_s) << ',' << format_6g(std::abs(*o.truth.tau_true_s - *decision.tau_s)) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace radscan
