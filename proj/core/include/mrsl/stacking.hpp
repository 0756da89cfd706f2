#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrsl/data.hpp"
#include "mrsl/learners.hpp"
#include "mrsl/multires.hpp"
#include "mrsl/smoothing.hpp"

namespace mrsl {

enum class Mode { Baseline, SL0, SL };
enum class WeightScheme { W1, W2 };
/// Ordinal stage-one covariates: probabilities of categories 1..Z-1 per
/// resolution, or the argmax category as a number.
enum class StageOneOutput { ClassProbabilities, PredictedCategory };

std::string_view to_string(Mode mode) noexcept;
std::string_view to_string(WeightScheme scheme) noexcept;
std::string_view to_string(StageOneOutput output) noexcept;
Mode mode_from_string(std::string_view name);
WeightScheme weight_scheme_from_string(std::string_view name);
StageOneOutput stage_one_output_from_string(std::string_view name);

struct FoldAssignment {
  int num_folds = 0;
  std::vector<int> fold;  // subject index -> fold in 1..V
  std::uint64_t seed = 0;

  std::vector<std::size_t> members(int v) const;      // subjects in fold v
  std::vector<std::size_t> complement(int v) const;   // subjects outside fold v
};

/// Random balanced partition of N subjects into V folds.
FoldAssignment make_folds(std::size_t num_subjects, int num_folds, std::uint64_t seed);

/// W1: 1/n each. W2: 1/(m_z Z) for a voxel of category z. Grades are 1..Z.
std::vector<double> compute_weights(std::span<const int> grades, int num_levels, WeightScheme scheme);

/// Out-of-fold raw stage-one predictions: raw[s][i] holds subject i's
/// per-resolution predictions from spec s, fit without subject i's fold.
struct CvStageOne {
  FoldAssignment folds;
  std::vector<std::vector<ResolutionPredictions>> raw;
};

CvStageOne cv_stage1(const Dataset& train, std::span<const LearnerSpec> specs, int max_resolution,
                     Target target, const FoldAssignment& folds, int jobs = 1);

/// Stage-one covariates of one subject, columns ordered (spec, resolution[, class]).
/// `bandwidths` is empty for unsmoothed covariates, else one set per spec.
Eigen::MatrixXd stage_one_covariates(std::span<const ResolutionPredictions> raw,
                                     std::span<const Coord> coords,
                                     std::span<const BandwidthSet> bandwidths, Target target,
                                     StageOneOutput output);

/// Probit of c on the covariates with intercept.
FittedLearner fit_stage2_binary(const Eigen::MatrixXd& covariates, std::span<const int> cancer,
                                double ridge = 1e-4);

/// Weighted ordered probit of G (1..Z) on the covariates.
FittedLearner fit_stage2_ordinal(const Eigen::MatrixXd& covariates, std::span<const int> grades,
                                 int num_levels, WeightScheme scheme, double ridge = 1e-4);

struct SuperLearnerConfig {
  std::vector<LearnerSpec> specs{LearnerSpec{}};
  int max_resolution = 3;
  int folds = 5;
  Target target = Target::Binary;
  StageOneOutput stage_one_output = StageOneOutput::ClassProbabilities;
  std::vector<double> bandwidth_grid = default_bandwidth_grid();
  /// Defaults to MaxAuc for binary targets and MinError for ordinal ones.
  std::optional<BandwidthCriterion> criterion;
  double stage_two_ridge = 1e-4;
  std::uint64_t seed = 0;
  int jobs = 1;
  /// Also fit stage two once per fold (on the other folds' rows) for reporting.
  bool fold_reports = true;

  BandwidthCriterion effective_criterion() const noexcept;
};

void validate(const SuperLearnerConfig& config);

struct SuperLearnerModel {
  Mode mode = Mode::SL;
  Target target = Target::Binary;
  int num_levels = 2;
  int max_resolution = 1;
  WeightScheme scheme = WeightScheme::W1;
  StageOneOutput stage_one_output = StageOneOutput::ClassProbabilities;
  std::vector<MultiResModel> stage_one;
  std::vector<BandwidthSet> bandwidths;         // SL only, one per spec
  std::optional<FittedLearner> stage_two;       // absent for Baseline
  std::vector<FittedLearner> fold_stage_two;    // per-fold fits, reporting only
  std::vector<std::string> columns;             // stage-two covariate names
  FoldAssignment folds;

  int num_classes() const noexcept;
};

struct Variant {
  Mode mode = Mode::SL;
  WeightScheme scheme = WeightScheme::W1;
};

SuperLearnerModel train_superlearner(const Dataset& train, const SuperLearnerConfig& config,
                                     Mode mode, WeightScheme scheme = WeightScheme::W1);

/// Trains several variants on one training set, sharing the cross-validated
/// stage one, the bandwidth search and the final stage-one refit.
std::vector<SuperLearnerModel> train_superlearners(const Dataset& train,
                                                   const SuperLearnerConfig& config,
                                                   std::span<const Variant> variants);

struct SubjectPrediction {
  Eigen::MatrixXd proba;      // n x C class probabilities
  std::vector<int> category;  // binary: c; ordinal: G in 1..Z (argmax, ties to the lower)
};

SubjectPrediction predict_superlearner(const SuperLearnerModel& model, const SubjectImage& subject);

/// Stage-two coefficients by column, plus cutpoints and per-fold fits.
nlohmann::json stage_two_report(const SuperLearnerModel& model);
std::string format_stage_two_report(const SuperLearnerModel& model);

nlohmann::json superlearner_to_json(const SuperLearnerModel& model);
SuperLearnerModel superlearner_from_json(const nlohmann::json& doc);

}  // namespace mrsl
