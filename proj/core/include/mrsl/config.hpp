#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>

#include "mrsl/experiment.hpp"
#include "mrsl/learners.hpp"
#include "mrsl/stacking.hpp"

namespace mrsl {

/// A learner given as a name ("glm", "qda", "rf", "ordered_probit") or an
/// object with "kind" and hyperparameters.
LearnerSpec learner_spec_from_config(const nlohmann::json& doc);

/// Stacking options: learners, resolutions, folds, target, stage_one_output,
/// bandwidth_grid, criterion, stage_two_ridge, seed.
SuperLearnerConfig superlearner_config_from_json(const nlohmann::json& doc,
                                                 SuperLearnerConfig base = {});

/// Relative paths (dataset, shape file) resolve against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc,
                                             const std::filesystem::path& base_dir = {});

nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

/// 64-bit FNV-1a over the canonical (sorted-key, compact) JSON text.
std::uint64_t config_hash(const nlohmann::json& doc);
std::string hex64(std::uint64_t value);

BandwidthCriterion bandwidth_criterion_from_string(std::string_view name);
SensitivityRule sensitivity_rule_from_string(std::string_view name);

}  // namespace mrsl
