#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <vector>

#include "mrsl/data.hpp"
#include "mrsl/learners.hpp"

namespace mrsl {

enum class Target { Binary, Ordinal };

std::string_view to_string(Target target) noexcept;
Target target_from_string(std::string_view name);

/// Number of classes a learner sees for this target (2, or Z).
int num_classes_for(Target target, int num_levels) noexcept;

/// 0-based class index of voxel j: c for binary, G - 1 for ordinal.
int class_label(const SubjectImage& subject, std::size_t j, Target target) noexcept;

/// Cell of the k x k grid on (-1,1)^2 containing s, numbered 1..k^2 with
/// l = ix * k + iy + 1 (x-major). Cells are half-open [lo, hi); the top cell
/// on each axis is clamped.
int region_index(Coord s, int k);

/// Per-resolution, per-cell fitted learners for k = 1..K.
class MultiResModel {
 public:
  MultiResModel() = default;
  MultiResModel(LearnerSpec spec, int max_resolution, Target target, int num_classes, int dim,
                std::vector<FittedLearner> learners);

  const LearnerSpec& spec() const noexcept { return spec_; }
  int max_resolution() const noexcept { return max_resolution_; }
  Target target() const noexcept { return target_; }
  int num_classes() const noexcept { return num_classes_; }
  int dim() const noexcept { return dim_; }
  /// Learner for resolution k (1-based) and cell l (1-based).
  const FittedLearner& learner(int k, int l) const;
  std::size_t size() const noexcept { return learners_.size(); }

  static std::size_t offset(int k) noexcept;  // sum of j^2 for j < k

 private:
  LearnerSpec spec_;
  int max_resolution_ = 1;
  Target target_ = Target::Binary;
  int num_classes_ = 2;
  int dim_ = 0;
  std::vector<FittedLearner> learners_;
};

/// Fits spec's learner in every cell at every resolution k <= K. Single-class
/// cells become constant-class learners; empty cells predict the global
/// training class frequencies. Random-forest seeds are derived per cell.
MultiResModel fit_multiresolution(const Dataset& train, const LearnerSpec& spec, int max_resolution,
                                  Target target, int jobs = 1);

/// Raw predictions of one subject: element k - 1 is an n x C matrix of class
/// probabilities from each voxel's resolution-k cell learner.
using ResolutionPredictions = std::vector<Eigen::MatrixXd>;

ResolutionPredictions predict_multiresolution(const MultiResModel& model,
                                              const SubjectImage& subject);

nlohmann::json multires_to_json(const MultiResModel& model);
MultiResModel multires_from_json(const nlohmann::json& doc);

}  // namespace mrsl
