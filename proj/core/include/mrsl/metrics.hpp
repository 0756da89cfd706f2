#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mrsl {

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Labels are 0/1; both must be present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double threshold;    // voxels with score >= threshold are called positive
  double sensitivity;
  double specificity;
};

struct RocCurve {
  std::vector<RocPoint> points;  // thresholds descending, plus the (0,0) and (1,1) ends
  double auc = 0.0;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

enum class SensitivityRule {
  Interpolate,  // linear interpolation of the ROC polyline
  Step          // best sensitivity among thresholds meeting the specificity
};

/// Sensitivity at a fixed specificity target in (0, 1]. On a vertical ROC
/// segment the upper end is used.
double sensitivity_at_specificity(std::span<const double> scores, std::span<const int> labels,
                                  double target,
                                  SensitivityRule rule = SensitivityRule::Interpolate);

/// Z x Z counts; rows are true categories, columns predicted (both 1..Z).
struct ConfusionTable {
  int num_levels = 0;
  std::vector<std::vector<std::int64_t>> counts;

  std::int64_t total() const noexcept;
  std::int64_t row_total(int z) const;  // z is 1-based
  std::int64_t col_total(int z) const;
  ConfusionTable& operator+=(const ConfusionTable& other);
};

ConfusionTable confusion_table(std::span<const int> predicted, std::span<const int> truth,
                               int num_levels);

/// Per-category rates. std::nullopt marks an undefined rate ("NA").
struct CategoryRates {
  std::vector<std::optional<double>> fpr;
  std::vector<std::optional<double>> fdr;
  double overall_error = 0.0;
};

CategoryRates category_rates(const ConfusionTable& table);

/// Binary summary used by reports.
struct BinaryMetrics {
  double auc = 0.0;
  double s80 = 0.0;
  double s90 = 0.0;
};

BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const int> labels,
                             SensitivityRule rule = SensitivityRule::Interpolate);

nlohmann::json to_json(const ConfusionTable& table);
nlohmann::json to_json(const CategoryRates& rates);
nlohmann::json to_json(const BinaryMetrics& m);

/// "0.14" style with two decimals, or "NA".
std::string format_rate(const std::optional<double>& rate, int decimals = 2);

/// Aligned-text rendering of a classification table with FPR/FDR columns.
std::string format_category_table(const ConfusionTable& table, const CategoryRates& rates);

}  // namespace mrsl
