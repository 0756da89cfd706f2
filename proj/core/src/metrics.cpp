#include "mrsl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "mrsl/error.hpp"

namespace mrsl {

namespace {

struct ClassCounts {
  std::int64_t pos = 0;
  std::int64_t neg = 0;
};

ClassCounts check_binary(std::span<const double> scores, std::span<const int> labels,
                         const char* who) {
  if (scores.size() != labels.size())
    throw DimensionError(std::string(who) + ": scores and labels differ in length");
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) ++c.pos;
    else if (labels[i] == 0) ++c.neg;
    else throw Error(std::string(who) + ": labels must be 0 or 1");
    if (std::isnan(scores[i])) throw Error(std::string(who) + ": NaN score");
  }
  if (c.pos == 0 || c.neg == 0) throw Error(std::string(who) + ": both classes must be present");
  return c;
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts counts = check_binary(scores, labels, "roc_auc");
  // Ascending scan over tie groups; twice the U statistic stays an integer.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t twice_u = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    twice_u += 2 * pos * neg_below + pos * neg;
    neg_below += neg;
    i = j;
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(counts.pos) * static_cast<double>(counts.neg));
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts counts = check_binary(scores, labels, "roc_curve");
  const auto order = descending_order(scores);
  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({t, static_cast<double>(tp) / static_cast<double>(counts.pos),
                            1.0 - static_cast<double>(fp) / static_cast<double>(counts.neg)});
  }
  if (curve.points.back().sensitivity != 1.0 || curve.points.back().specificity != 0.0)
    curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 0.0});
  curve.auc = roc_auc(scores, labels);
  return curve;
}

double sensitivity_at_specificity(std::span<const double> scores, std::span<const int> labels,
                                  double target, SensitivityRule rule) {
  if (!(target > 0.0 && target <= 1.0))
    throw Error("sensitivity_at_specificity: target must lie in (0, 1]");
  const RocCurve curve = roc_curve(scores, labels);
  const auto& pts = curve.points;  // specificity non-increasing along the curve
  if (rule == SensitivityRule::Step) {
    double best = 0.0;
    for (const auto& p : pts)
      if (p.specificity >= target) best = std::max(best, p.sensitivity);
    return best;
  }
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].specificity == target) best = std::max(best, pts[i].sensitivity);
    if (i + 1 < pts.size() && pts[i].specificity > target && pts[i + 1].specificity < target) {
      const double frac = (pts[i].specificity - target) / (pts[i].specificity - pts[i + 1].specificity);
      best = std::max(best, pts[i].sensitivity + frac * (pts[i + 1].sensitivity - pts[i].sensitivity));
    }
  }
  return best;
}

std::int64_t ConfusionTable::total() const noexcept {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (auto v : row) t += v;
  return t;
}

std::int64_t ConfusionTable::row_total(int z) const {
  const auto& row = counts.at(static_cast<std::size_t>(z - 1));
  return std::accumulate(row.begin(), row.end(), std::int64_t{0});
}

std::int64_t ConfusionTable::col_total(int z) const {
  std::int64_t t = 0;
  for (const auto& row : counts) t += row.at(static_cast<std::size_t>(z - 1));
  return t;
}

ConfusionTable& ConfusionTable::operator+=(const ConfusionTable& other) {
  if (other.num_levels != num_levels) throw DimensionError("confusion tables differ in size");
  for (int t = 0; t < num_levels; ++t)
    for (int p = 0; p < num_levels; ++p)
      counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] +=
          other.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  return *this;
}

ConfusionTable confusion_table(std::span<const int> predicted, std::span<const int> truth,
                               int num_levels) {
  if (predicted.size() != truth.size())
    throw DimensionError("confusion_table: predicted and true labels differ in length");
  if (predicted.empty()) throw Error("confusion_table: no voxels");
  if (num_levels < 2) throw Error("confusion_table: need at least 2 levels");
  ConfusionTable table;
  table.num_levels = num_levels;
  table.counts.assign(static_cast<std::size_t>(num_levels),
                      std::vector<std::int64_t>(static_cast<std::size_t>(num_levels), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 1 || t > num_levels || p < 1 || p > num_levels)
      throw Error("confusion_table: category outside 1.." + std::to_string(num_levels));
    ++table.counts[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(p - 1)];
  }
  return table;
}

CategoryRates category_rates(const ConfusionTable& table) {
  const int z = table.num_levels;
  const std::int64_t total = table.total();
  if (total <= 0) throw Error("category_rates: empty table");
  CategoryRates rates;
  std::int64_t trace = 0;
  for (int k = 1; k <= z; ++k) {
    const std::int64_t diag = table.counts[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(k - 1)];
    trace += diag;
    const std::int64_t row = table.row_total(k);
    const std::int64_t col = table.col_total(k);
    rates.fpr.push_back(row > 0 ? std::optional<double>(static_cast<double>(row - diag) / static_cast<double>(row))
                                : std::nullopt);
    rates.fdr.push_back(col > 0 ? std::optional<double>(static_cast<double>(col - diag) / static_cast<double>(col))
                                : std::nullopt);
  }
  rates.overall_error = 1.0 - static_cast<double>(trace) / static_cast<double>(total);
  return rates;
}

BinaryMetrics binary_metrics(std::span<const double> scores, std::span<const int> labels,
                             SensitivityRule rule) {
  return {roc_auc(scores, labels), sensitivity_at_specificity(scores, labels, 0.80, rule),
          sensitivity_at_specificity(scores, labels, 0.90, rule)};
}

nlohmann::json to_json(const ConfusionTable& table) {
  return {{"num_levels", table.num_levels}, {"counts", table.counts}};
}

nlohmann::json to_json(const CategoryRates& rates) {
  auto opt = [](const std::vector<std::optional<double>>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : v) a.push_back(x ? nlohmann::json(*x) : nlohmann::json("NA"));
    return a;
  };
  return {{"fpr", opt(rates.fpr)}, {"fdr", opt(rates.fdr)}, {"overall_error", rates.overall_error}};
}

nlohmann::json to_json(const BinaryMetrics& m) {
  return {{"auc", m.auc}, {"s80", m.s80}, {"s90", m.s90}};
}

std::string format_rate(const std::optional<double>& rate, int decimals) {
  if (!rate) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << *rate;
  return os.str();
}

std::string format_category_table(const ConfusionTable& table, const CategoryRates& rates) {
  std::ostringstream os;
  const int z = table.num_levels;
  os << std::setw(6) << "true";
  for (int p = 1; p <= z; ++p) os << std::setw(10) << p;
  os << std::setw(8) << "FPR" << std::setw(8) << "FDR" << '\n';
  for (int t = 1; t <= z; ++t) {
    os << std::setw(6) << t;
    for (int p = 1; p <= z; ++p)
      os << std::setw(10) << table.counts[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(p - 1)];
    os << std::setw(8) << format_rate(rates.fpr[static_cast<std::size_t>(t - 1)])
       << std::setw(8) << format_rate(rates.fdr[static_cast<std::size_t>(t - 1)]) << '\n';
  }
  os << "overall error rate: " << format_rate(rates.overall_error) << '\n';
  return os.str();
}

}  // namespace mrsl
