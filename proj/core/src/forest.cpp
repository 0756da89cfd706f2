#include <algorithm>
#include <cmath>
#include <numeric>

#include "detail.hpp"
#include "mrsl/error.hpp"
#include "mrsl/learners.hpp"
#include "mrsl/random.hpp"

namespace mrsl {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const int> labels, int num_classes,
              int features_per_split, int leaf_min, CounterRng& rng)
      : x_(x),
        labels_(labels),
        num_classes_(num_classes),
        mtry_(features_per_split),
        leaf_min_(leaf_min),
        rng_(rng) {}

  DecisionTree build(std::vector<int> rows) {
    rows_ = std::move(rows);
    tree_.nodes.clear();
    grow(0, rows_.size());
    return std::move(tree_);
  }

 private:
  std::vector<int> class_counts(std::size_t begin, std::size_t end) const {
    std::vector<int> counts(static_cast<std::size_t>(num_classes_), 0);
    for (std::size_t i = begin; i < end; ++i)
      ++counts[static_cast<std::size_t>(labels_[static_cast<std::size_t>(rows_[i])])];
    return counts;
  }

  static double gini_mass(const std::vector<int>& counts, int total) {
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (int c : counts) sum_sq += static_cast<double>(c) * c;
    return static_cast<double>(total) - sum_sq / total;  // total * Gini
  }

  int grow(std::size_t begin, std::size_t end) {
    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const auto counts = class_counts(begin, end);
    const int total = static_cast<int>(end - begin);
    tree_.nodes.back().label =
        static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const int distinct = static_cast<int>(std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }));
    if (distinct <= 1 || total < 2 * leaf_min_) return index;

    const double parent = gini_mass(counts, total);
    const Split best = find_split(begin, end, parent);
    if (best.feature < 0) return index;

    auto mid = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                              rows_.begin() + static_cast<std::ptrdiff_t>(end), [&](int r) {
                                return x_(r, best.feature) <= best.threshold;
                              });
    const auto split_at = static_cast<std::size_t>(mid - rows_.begin());
    const int left = grow(begin, split_at);
    const int right = grow(split_at, end);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  Split find_split(std::size_t begin, std::size_t end, double parent) {
    const int d = static_cast<int>(x_.cols());
    std::vector<int> features(static_cast<std::size_t>(d));
    std::iota(features.begin(), features.end(), 0);
    const int m = std::min(mtry_, d);
    for (int k = 0; k < m; ++k) {
      const std::size_t j = static_cast<std::size_t>(k) + rng_.index(static_cast<std::size_t>(d - k));
      std::swap(features[static_cast<std::size_t>(k)], features[j]);
    }

    Split best;
    best.impurity = parent - 1e-12;
    const int total = static_cast<int>(end - begin);
    std::vector<std::pair<double, int>> column(static_cast<std::size_t>(total));
    std::vector<int> left(static_cast<std::size_t>(num_classes_));
    std::vector<int> right(static_cast<std::size_t>(num_classes_));
    for (int k = 0; k < m; ++k) {
      const int f = features[static_cast<std::size_t>(k)];
      for (int i = 0; i < total; ++i) {
        const int r = rows_[begin + static_cast<std::size_t>(i)];
        column[static_cast<std::size_t>(i)] = {x_(r, f), labels_[static_cast<std::size_t>(r)]};
      }
      std::sort(column.begin(), column.end());
      std::fill(left.begin(), left.end(), 0);
      std::fill(right.begin(), right.end(), 0);
      for (const auto& [v, l] : column) ++right[static_cast<std::size_t>(l)];
      for (int i = 0; i + 1 < total; ++i) {
        const auto label = static_cast<std::size_t>(column[static_cast<std::size_t>(i)].second);
        ++left[label];
        --right[label];
        const int n_left = i + 1;
        const int n_right = total - n_left;
        const double lo = column[static_cast<std::size_t>(i)].first;
        const double hi = column[static_cast<std::size_t>(i + 1)].first;
        if (n_left < leaf_min_ || n_right < leaf_min_ || !(lo < hi)) continue;
        const double impurity = gini_mass(left, n_left) + gini_mass(right, n_right);
        if (impurity < best.impurity) {
          double threshold = 0.5 * (lo + hi);
          if (!(threshold < hi)) threshold = lo;
          best = {f, threshold, impurity};
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> labels_;
  int num_classes_;
  int mtry_;
  int leaf_min_;
  CounterRng& rng_;
  std::vector<int> rows_;
  DecisionTree tree_;
};

}  // namespace

FittedLearner fit_random_forest(const Eigen::MatrixXd& features, std::span<const int> labels,
                                int num_classes, const ForestOptions& options) {
  detail::check_training_input("fit_random_forest", features, labels, num_classes);
  if (options.trees < 1) throw ConfigError("trees", "must be >= 1");
  if (options.leaf_min < 1) throw ConfigError("leaf_min", "must be >= 1");
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  const int mtry = options.features_per_split > 0
                       ? options.features_per_split
                       : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));

  // Canonical row order, so bootstrap draws do not depend on input order.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (Eigen::Index f = 0; f < d; ++f) {
      if (features(a, f) != features(b, f)) return features(a, f) < features(b, f);
    }
    return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
  });
  Eigen::MatrixXd x(n, d);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = features.row(order[static_cast<std::size_t>(i)]);
    y[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  }

  ForestParams params;
  params.trees.reserve(static_cast<std::size_t>(options.trees));
  for (int t = 0; t < options.trees; ++t) {
    CounterRng rng(derive_seed(options.seed, static_cast<std::uint64_t>(t)));
    std::vector<int> sample(static_cast<std::size_t>(n));
    for (auto& s : sample) s = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    TreeBuilder builder(x, y, num_classes, mtry, options.leaf_min, rng);
    params.trees.push_back(builder.build(std::move(sample)));
  }
  LearnerSpec spec;
  spec.kind = LearnerKind::RandomForest;
  spec.trees = options.trees;
  spec.features_per_split = options.features_per_split;
  spec.leaf_min = options.leaf_min;
  spec.seed = options.seed;
  return FittedLearner(spec, num_classes, static_cast<int>(d), std::move(params));
}

}  // namespace mrsl
