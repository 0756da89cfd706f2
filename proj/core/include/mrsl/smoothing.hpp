#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "mrsl/data.hpp"

namespace mrsl {

/// Nadaraya-Watson smoothing over one image with the Gaussian kernel
/// exp(-|s_j - s_j'|^2 / (2 h^2)), self-weight included.
std::vector<double> nw_smooth(std::span<const double> values, std::span<const Coord> coords,
                              double h);

/// Smooths every column of an n x m matrix with shared kernel weights.
Eigen::MatrixXd nw_smooth_columns(const Eigen::MatrixXd& values, std::span<const Coord> coords,
                                  double h);

/// Smooths each class-probability column, then renormalizes every row to sum 1.
Eigen::MatrixXd nw_smooth_proba(const Eigen::MatrixXd& proba, std::span<const Coord> coords,
                                double h);

enum class BandwidthCriterion { MaxAuc, MinError };

std::string_view to_string(BandwidthCriterion c) noexcept;

/// Bandwidth per resolution (index k - 1) for one base-learner spec.
struct BandwidthSet {
  std::vector<double> h;
  BandwidthCriterion criterion = BandwidthCriterion::MaxAuc;
  /// scores[k - 1][g]: criterion value of grid entry g at resolution k.
  std::vector<std::vector<double>> scores;

  double at(int k) const { return h.at(static_cast<std::size_t>(k - 1)); }
};

/// Default candidate grid in standardized-coordinate units.
std::vector<double> default_bandwidth_grid();

/// Out-of-fold raw predictions of one image at every resolution.
struct ImagePredictions {
  std::span<const Coord> coords;
  std::span<const Eigen::MatrixXd> proba;  // element k - 1: n x C at resolution k
  std::span<const int> labels;             // 0-based class labels
};

/// Picks one bandwidth per resolution from `grid` by scoring the pooled,
/// smoothed out-of-fold predictions. MaxAuc scores P(class > 0) against
/// label > 0; MinError uses the argmax of the renormalized smoothed vector.
/// Ties go to the smaller bandwidth.
BandwidthSet select_bandwidths(std::span<const ImagePredictions> images,
                               std::span<const double> grid, BandwidthCriterion criterion,
                               int jobs = 1);

nlohmann::json bandwidths_to_json(const BandwidthSet& set);
BandwidthSet bandwidths_from_json(const nlohmann::json& doc);

}  // namespace mrsl
