#include "mrsl/config.hpp"

#include <cstdio>

#include "mrsl/error.hpp"

namespace mrsl {

namespace {

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& dst, const std::string& field) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(dst);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(field, "has the wrong type");
  }
}

std::string read_string(const nlohmann::json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field, "expected a string");
  return v.get<std::string>();
}

// A string or an array of strings.
std::vector<std::string> string_list(const nlohmann::json& v, const std::string& field) {
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw ConfigError(field, "expected a string or an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(read_string(e, field));
  return out;
}

}  // namespace

BandwidthCriterion bandwidth_criterion_from_string(std::string_view name) {
  if (name == "max_auc" || name == "auc") return BandwidthCriterion::MaxAuc;
  if (name == "min_error" || name == "error") return BandwidthCriterion::MinError;
  throw ConfigError("criterion", "unknown bandwidth criterion '" + std::string(name) + "'");
}

SensitivityRule sensitivity_rule_from_string(std::string_view name) {
  if (name == "interpolate") return SensitivityRule::Interpolate;
  if (name == "step") return SensitivityRule::Step;
  throw ConfigError("sensitivity_rule", "unknown rule '" + std::string(name) + "' (interpolate, step)");
}

LearnerSpec learner_spec_from_config(const nlohmann::json& j) {
  LearnerSpec s;
  if (j.is_string()) {
    s.kind = learner_kind_from_string(j.get<std::string>());
    return s;
  }
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("learners", "each learner needs a kind");
  s.kind = learner_kind_from_string(read_string(j["kind"], "learners.kind"));
  read(j, "ridge", s.ridge, "learners.ridge");
  read(j, "trees", s.trees, "learners.trees");
  read(j, "features_per_split", s.features_per_split, "learners.features_per_split");
  read(j, "leaf_min", s.leaf_min, "learners.leaf_min");
  read(j, "jitter", s.jitter, "learners.jitter");
  read(j, "seed", s.seed, "learners.seed");
  validate(s);
  return s;
}

namespace {

std::vector<LearnerSpec> learners_from(const nlohmann::json& v) {
  std::vector<LearnerSpec> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(learner_spec_from_config(e));
  } else {
    out.push_back(learner_spec_from_config(v));
  }
  if (out.empty()) throw ConfigError("learners", "at least one learner is required");
  return out;
}

}  // namespace

SuperLearnerConfig superlearner_config_from_json(const nlohmann::json& j, SuperLearnerConfig c) {
  if (!j.is_object()) throw ConfigError("model", "expected an object");
  if (j.contains("learners")) c.specs = learners_from(j["learners"]);
  if (j.contains("learner")) c.specs = learners_from(j["learner"]);
  read(j, "resolutions", c.max_resolution, "resolutions");
  read(j, "folds", c.folds, "folds");
  if (j.contains("target")) c.target = target_from_string(read_string(j["target"], "target"));
  if (j.contains("stage_one_output"))
    c.stage_one_output = stage_one_output_from_string(read_string(j["stage_one_output"], "stage_one_output"));
  read(j, "bandwidth_grid", c.bandwidth_grid, "bandwidth_grid");
  if (j.contains("criterion")) c.criterion = bandwidth_criterion_from_string(read_string(j["criterion"], "criterion"));
  read(j, "stage_two_ridge", c.stage_two_ridge, "stage_two_ridge");
  read(j, "seed", c.seed, "seed");
  read(j, "jobs", c.jobs, "jobs");
  read(j, "fold_reports", c.fold_reports, "fold_reports");
  validate(c);
  return c;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment", "expected an object");
  ExperimentConfig c;
  read(j, "seed", c.seed, "seed");
  auto resolve = [&](const std::filesystem::path& p) {
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  if (j.contains("simulation")) {
    const auto& sim = j["simulation"];
    SimConfig base;
    base.seed = c.seed;
    c.simulation = sim.is_string() ? sim_config_from_json(nlohmann::json{{"preset", sim}}, base)
                                   : sim_config_from_json(sim, base);
    if (c.simulation->shape.generator == ShapeSpec::Generator::File)
      c.simulation->shape.file = resolve(c.simulation->shape.file);
  }
  if (j.contains("dataset")) c.dataset = resolve(read_string(j["dataset"], "dataset"));
  if (j.contains("learners")) c.learners = learners_from(j["learners"]);
  read(j, "combine_learners", c.combine_learners, "combine_learners");
  if (j.contains("modes")) {
    c.modes.clear();
    for (const auto& m : string_list(j["modes"], "modes")) c.modes.push_back(mode_from_string(m));
  }
  if (j.contains("weights")) {
    c.schemes.clear();
    for (const auto& w : string_list(j["weights"], "weights")) c.schemes.push_back(weight_scheme_from_string(w));
  }
  if (j.contains("target")) c.target = target_from_string(read_string(j["target"], "target"));
  read(j, "resolutions", c.max_resolution, "resolutions");
  read(j, "folds", c.folds, "folds");
  read(j, "inner_folds", c.inner_folds, "inner_folds");
  read(j, "bandwidth_grid", c.bandwidth_grid, "bandwidth_grid");
  if (j.contains("criterion")) c.criterion = bandwidth_criterion_from_string(read_string(j["criterion"], "criterion"));
  if (j.contains("stage_one_output"))
    c.stage_one_output = stage_one_output_from_string(read_string(j["stage_one_output"], "stage_one_output"));
  if (j.contains("sensitivity_rule"))
    c.sensitivity_rule = sensitivity_rule_from_string(read_string(j["sensitivity_rule"], "sensitivity_rule"));
  read(j, "replicates", c.replicates, "replicates");
  read(j, "jobs", c.jobs, "jobs");
  validate(c);
  return c;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  if (c.simulation) j["simulation"] = sim_config_to_json(*c.simulation);
  if (!c.dataset.empty()) j["dataset"] = c.dataset.string();
  j["learners"] = nlohmann::json::array();
  for (const auto& s : c.learners) j["learners"].push_back(spec_to_json(s));
  j["combine_learners"] = c.combine_learners;
  j["modes"] = nlohmann::json::array();
  for (Mode m : c.modes) j["modes"].push_back(to_string(m));
  j["weights"] = nlohmann::json::array();
  for (WeightScheme w : c.schemes) j["weights"].push_back(to_string(w));
  if (c.target) j["target"] = to_string(*c.target);
  j["resolutions"] = c.max_resolution;
  j["folds"] = c.folds;
  j["inner_folds"] = c.inner_folds;
  j["bandwidth_grid"] = c.bandwidth_grid;
  if (c.criterion) j["criterion"] = to_string(*c.criterion);
  j["stage_one_output"] = to_string(c.stage_one_output);
  j["sensitivity_rule"] = c.sensitivity_rule == SensitivityRule::Interpolate ? "interpolate" : "step";
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  return j;
}

std::uint64_t config_hash(const nlohmann::json& doc) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace mrsl
