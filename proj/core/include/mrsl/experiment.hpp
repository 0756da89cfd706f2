#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrsl/data.hpp"
#include "mrsl/metrics.hpp"
#include "mrsl/simgen.hpp"
#include "mrsl/stacking.hpp"

namespace mrsl {

struct ExperimentConfig {
  std::optional<SimConfig> simulation;  // one fresh dataset per replicate
  std::filesystem::path dataset;        // used when simulation is absent
  std::vector<LearnerSpec> learners{LearnerSpec{}};
  bool combine_learners = false;        // adds one stacked row over all learners
  std::vector<Mode> modes{Mode::Baseline, Mode::SL0, Mode::SL};
  std::vector<WeightScheme> schemes{WeightScheme::W1};  // ordinal targets only
  std::optional<Target> target;         // defaults from the data's level count
  int max_resolution = 3;
  int folds = 5;                        // evaluation folds
  int inner_folds = 0;                  // stacking folds; 0 reuses `folds`
  std::vector<double> bandwidth_grid = default_bandwidth_grid();
  std::optional<BandwidthCriterion> criterion;
  StageOneOutput stage_one_output = StageOneOutput::ClassProbabilities;
  SensitivityRule sensitivity_rule = SensitivityRule::Interpolate;
  int replicates = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
};

void validate(const ExperimentConfig& config);

/// One (learner, mode, weights) row of a replicate.
struct CellResult {
  std::string learner;
  Mode mode = Mode::SL;
  std::optional<WeightScheme> scheme;  // ordinal stacked rows only
  std::optional<BinaryMetrics> binary;
  std::optional<ConfusionTable> table;
  std::optional<CategoryRates> rates;
};

struct ReplicateResult {
  int replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<CellResult> cells;
};

struct ExperimentResult {
  Target target = Target::Binary;
  int num_levels = 2;
  std::vector<ReplicateResult> replicates;

  std::size_t failures() const noexcept;
};

using ProgressSink = std::function<void(std::string_view)>;

/// Evaluates one dataset: outer V-fold CV over subjects, training every
/// requested variant on each training part and pooling held-out predictions.
std::vector<CellResult> evaluate_dataset(const Dataset& data, const ExperimentConfig& config,
                                         std::uint64_t seed, int jobs = 1,
                                         const ProgressSink& progress = {});

/// Runs all replicates; failed replicates are recorded and skipped.
ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressSink& progress = {});

/// Mean (SD) over successful replicates per row, as JSON and as a text table.
nlohmann::json summarize(const ExperimentResult& result);
std::string format_summary(const ExperimentResult& result);

nlohmann::json to_json(const ReplicateResult& replicate);

}  // namespace mrsl
