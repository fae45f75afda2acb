#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "radscan/scan_engine.hpp"
#include "radscan/simulator.hpp"

namespace radscan {

struct LabeledOutcome {
  GroundTruth truth;
  ScanResult result;
};

// Pairs labels with scan results by run id, in label order. Throws InvalidInput listing
// every run id present on only one side.
std::vector<LabeledOutcome> join_outcomes(std::span<const GroundTruth> labels, std::span<const ScanResult> results);

inline constexpr std::size_t kNumClasses = kNumSources + 1;  // 0 = no source

// Rows are the true source 0..6, columns the estimated source (0 when T < phi).
struct ConfusionMatrix {
  double phi = 0.0;
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::array<std::size_t, kNumClasses> row_totals() const;
  std::array<std::size_t, kNumClasses> column_totals() const;
  std::size_t total() const;
  // Correct source ids over detected source runs, and over all source runs.
  double id_accuracy_detected() const;
  double id_accuracy_all_sources() const;
};

ConfusionMatrix confusion_matrix(std::span<const LabeledOutcome> outcomes, double phi);

struct LocalizationStats {
  std::size_t count = 0;
  double median_s = 0.0;
  double mean_s = 0.0;
  double p95_s = 0.0;
};

struct ThresholdMetrics {
  double phi = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double tpr = 0.0;
  double fpr = 0.0;
  // 1 when nothing is detected.
  double precision = 1.0;
  // Over detected source runs; 1 when none are detected.
  double id_accuracy = 1.0;
  // Over all source runs, missed detections counting as errors; 0 without source runs.
  double id_accuracy_all_sources = 0.0;
  LocalizationStats localization;
};

// Empty denominators give: tpr = 0, fpr = 0, precision = 1, id_accuracy = 1, and all
// localization statistics 0 with count 0.
std::vector<ThresholdMetrics> metrics_over_thresholds(std::span<const LabeledOutcome> outcomes,
                                                      std::span<const double> phis);

// |tau_true - tau_hat| for every source run with T >= phi, in input order.
std::vector<double> localization_distances(std::span<const LabeledOutcome> outcomes, double phi);

// Median and 95th percentile use linear interpolation between order statistics.
LocalizationStats summarize_distances(std::span<const double> distances);

double quantile(std::vector<double> values, double q);

// Area under the ROC curve of T separating source runs from null runs; ties count half.
double roc_auc(std::span<const LabeledOutcome> outcomes);

// -- output (floating values at 6 significant digits) -----------------------------------

std::string phi_label(double phi);
void write_metrics_csv(std::span<const ThresholdMetrics> metrics, const std::string& path);
void write_confusion_csv(const ConfusionMatrix& matrix, const std::string& path);
void write_localization_csv(std::span<const LabeledOutcome> outcomes, double phi, const std::string& path);

}  // namespace radscan
