#include "mrsl/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mrsl/error.hpp"
#include "mrsl/metrics.hpp"
#include "mrsl/parallel.hpp"

namespace mrsl {

namespace {

constexpr double kUnderflow = -746.0;

void check_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw Error("nw_smooth: bandwidth must be finite and > 0");
}

}  // namespace

std::string_view to_string(BandwidthCriterion c) noexcept {
  return c == BandwidthCriterion::MaxAuc ? "max_auc" : "min_error";
}

std::vector<double> default_bandwidth_grid() { return {0.02, 0.05, 0.1, 0.2, 0.4}; }

Eigen::MatrixXd nw_smooth_columns(const Eigen::MatrixXd& values, std::span<const Coord> coords,
                                  double h) {
  check_bandwidth(h);
  const auto n = static_cast<Eigen::Index>(coords.size());
  if (n == 0) throw Error("nw_smooth: empty image");
  if (values.rows() != n) throw DimensionError("nw_smooth: values and coordinates differ in length");
  if (!values.allFinite()) throw Error("nw_smooth: non-finite value");
  const Eigen::Index m = values.cols();
  const double scale = -0.5 / (h * h);

  // Row-major accumulation: numerator rows and kernel row sums. The kernel is
  // symmetric, so each pair is evaluated once.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> num(n, m);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> val = values;
  Eigen::VectorXd den(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    num.row(j) = val.row(j);
    den[j] = 1.0;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const Coord sj = coords[static_cast<std::size_t>(j)];
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double dx = coords[static_cast<std::size_t>(i)].x - sj.x;
      const double dy = coords[static_cast<std::size_t>(i)].y - sj.y;
      const double arg = scale * (dx * dx + dy * dy);
      if (arg < kUnderflow) continue;  // exp() would return exactly 0
      const double w = std::exp(arg);
      den[j] += w;
      den[i] += w;
      for (Eigen::Index c = 0; c < m; ++c) {
        num(j, c) += w * val(i, c);
        num(i, c) += w * val(j, c);
      }
    }
  }
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index j = 0; j < n; ++j) out.row(j) = num.row(j) / den[j];
  return out;
}

std::vector<double> nw_smooth(std::span<const double> values, std::span<const Coord> coords,
                              double h) {
  if (values.size() != coords.size())
    throw DimensionError("nw_smooth: values and coordinates differ in length");
  const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const Eigen::MatrixXd out = nw_smooth_columns(Eigen::MatrixXd(v), coords, h);
  return {out.data(), out.data() + out.size()};
}

Eigen::MatrixXd nw_smooth_proba(const Eigen::MatrixXd& proba, std::span<const Coord> coords,
                                double h) {
  Eigen::MatrixXd out = nw_smooth_columns(proba, coords, h);
  for (Eigen::Index j = 0; j < out.rows(); ++j) {
    const double total = out.row(j).sum();
    if (total > 0.0) out.row(j) /= total;
  }
  return out;
}

BandwidthSet select_bandwidths(std::span<const ImagePredictions> images,
                               std::span<const double> grid, BandwidthCriterion criterion,
                               int jobs) {
  if (grid.empty()) throw ConfigError("bandwidth_grid", "must not be empty");
  for (double h : grid) check_bandwidth(h);
  if (images.empty()) throw Error("select_bandwidths: no images");
  const std::size_t num_res = images.front().proba.size();
  if (num_res == 0) throw Error("select_bandwidths: no resolutions");
  for (const auto& img : images)
    if (img.proba.size() != num_res) throw DimensionError("select_bandwidths: resolution count differs");
  const Eigen::Index num_classes = images.front().proba.front().cols();
  const bool auc = criterion == BandwidthCriterion::MaxAuc;

  // Columns smoothed per resolution: P(class > 0) for AUC, the full vector otherwise.
  const Eigen::Index width = auc ? 1 : num_classes;
  auto stacked = [&](const ImagePredictions& img) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(img.coords.size()),
                      static_cast<Eigen::Index>(num_res) * width);
    for (std::size_t k = 0; k < num_res; ++k) {
      const Eigen::MatrixXd& p = img.proba[k];
      if (p.rows() != m.rows() || p.cols() != num_classes)
        throw DimensionError("select_bandwidths: prediction shape mismatch");
      if (auc) m.col(static_cast<Eigen::Index>(k)) = Eigen::VectorXd::Ones(p.rows()) - p.col(0);
      else m.middleCols(static_cast<Eigen::Index>(k) * width, width) = p;
    }
    return m;
  };

  std::vector<int> pooled_label;
  for (const auto& img : images)
    for (int l : img.labels) pooled_label.push_back(auc ? (l > 0 ? 1 : 0) : l);

  BandwidthSet set;
  set.criterion = criterion;
  set.scores.assign(num_res, std::vector<double>(grid.size(), 0.0));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<Eigen::MatrixXd> smoothed(images.size());
    parallel_for(images.size(), jobs, [&](std::size_t i) {
      smoothed[i] = nw_smooth_columns(stacked(images[i]), images[i].coords, grid[g]);
    });
    for (std::size_t k = 0; k < num_res; ++k) {
      const auto col0 = static_cast<Eigen::Index>(k) * width;
      if (auc) {
        std::vector<double> pooled;
        pooled.reserve(pooled_label.size());
        for (const auto& m : smoothed)
          for (Eigen::Index j = 0; j < m.rows(); ++j) pooled.push_back(m(j, col0));
        set.scores[k][g] = roc_auc(pooled, pooled_label);
      } else {
        std::size_t errors = 0, pos = 0;
        for (const auto& m : smoothed)
          for (Eigen::Index j = 0; j < m.rows(); ++j, ++pos) {
            int best = 0;
            for (Eigen::Index c = 1; c < width; ++c)
              if (m(j, col0 + c) > m(j, col0 + best)) best = static_cast<int>(c);
            errors += best != pooled_label[pos] ? 1 : 0;
          }
        set.scores[k][g] = static_cast<double>(errors) / static_cast<double>(pos);
      }
    }
  }

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] < grid[b]; });
  for (std::size_t k = 0; k < num_res; ++k) {
    std::size_t best = order.front();
    for (std::size_t g : order) {
      const double s = set.scores[k][g];
      if (auc ? s > set.scores[k][best] : s < set.scores[k][best]) best = g;
    }
    set.h.push_back(grid[best]);
  }
  return set;
}

nlohmann::json bandwidths_to_json(const BandwidthSet& set) {
  return {{"h", set.h}, {"criterion", to_string(set.criterion)}, {"scores", set.scores}};
}

BandwidthSet bandwidths_from_json(const nlohmann::json& j) {
  BandwidthSet set;
  set.h = j.at("h").get<std::vector<double>>();
  const auto c = j.at("criterion").get<std::string>();
  if (c == "max_auc") set.criterion = BandwidthCriterion::MaxAuc;
  else if (c == "min_error") set.criterion = BandwidthCriterion::MinError;
  else throw SchemaError("unknown bandwidth criterion '" + c + "'");
  if (j.contains("scores")) set.scores = j["scores"].get<std::vector<std::vector<double>>>();
  for (double h : set.h)
    if (!(h > 0.0) || !std::isfinite(h)) throw SchemaError("bandwidths must be finite and > 0");
  return set;
}

}  // namespace mrsl
