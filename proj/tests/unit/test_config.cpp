#include <gtest/gtest.h>

#include "mrsl/config.hpp"
#include "mrsl/error.hpp"

using namespace mrsl;
using nlohmann::json;

namespace {

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST(LearnerSpecConfig, NamesAndObjects) {
  EXPECT_EQ(learner_spec_from_config("glm").kind, LearnerKind::ProbitGLM);
  EXPECT_EQ(learner_spec_from_config("qda").kind, LearnerKind::QDA);
  const auto rf = learner_spec_from_config(json{{"kind", "rf"}, {"trees", 25}, {"leaf_min", 3}});
  EXPECT_EQ(rf.kind, LearnerKind::RandomForest);
  EXPECT_EQ(rf.trees, 25);
  EXPECT_EQ(rf.leaf_min, 3);
  EXPECT_THROW(learner_spec_from_config("svm"), Error);
}

TEST(SuperLearnerConfigJson, ReadsEveryField) {
  const auto c = superlearner_config_from_json(json{{"learners", {"glm", "qda"}},
                                                    {"resolutions", 2},
                                                    {"folds", 4},
                                                    {"target", "ordinal"},
                                                    {"stage_one_output", "predicted_category"},
                                                    {"bandwidth_grid", {0.1, 0.2}},
                                                    {"criterion", "min_error"},
                                                    {"stage_two_ridge", 0.01},
                                                    {"seed", 9}});
  EXPECT_EQ(c.specs.size(), 2u);
  EXPECT_EQ(c.max_resolution, 2);
  EXPECT_EQ(c.folds, 4);
  EXPECT_EQ(c.target, Target::Ordinal);
  EXPECT_EQ(c.stage_one_output, StageOneOutput::PredictedCategory);
  EXPECT_EQ(c.bandwidth_grid, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(c.effective_criterion(), BandwidthCriterion::MinError);
  EXPECT_EQ(c.stage_two_ridge, 0.01);
  EXPECT_EQ(c.seed, 9u);
}

TEST(SuperLearnerConfigJson, DefaultCriterionFollowsTarget) {
  SuperLearnerConfig c;
  EXPECT_EQ(c.effective_criterion(), BandwidthCriterion::MaxAuc);
  c.target = Target::Ordinal;
  EXPECT_EQ(c.effective_criterion(), BandwidthCriterion::MinError);
}

TEST(SuperLearnerConfigJson, BadValuesNameTheField) {
  EXPECT_EQ(field_of([] { superlearner_config_from_json(json{{"folds", "five"}}); }), "folds");
  EXPECT_EQ(field_of([] { superlearner_config_from_json(json{{"criterion", "best"}}); }), "criterion");
  EXPECT_EQ(field_of([] { superlearner_config_from_json(json{{"learners", json::array()}}); }), "learners");
}

TEST(ExperimentConfigJson, PresetShorthandAndOverrides) {
  const auto c = experiment_config_from_json(json{{"simulation", "strong-hetero-strong-spatial"},
                                                  {"modes", {"Baseline", "SL"}},
                                                  {"replicates", 3},
                                                  {"seed", 5}});
  ASSERT_TRUE(c.simulation.has_value());
  EXPECT_EQ(c.simulation->matern.range, 0.5);
  EXPECT_EQ(c.modes, (std::vector<Mode>{Mode::Baseline, Mode::SL}));
  EXPECT_EQ(c.replicates, 3);
  EXPECT_EQ(c.seed, 5u);
}

TEST(ExperimentConfigJson, NestedSimulationFieldError) {
  const json doc{{"simulation", {{"preset", "strong-hetero-strong-spatial"}, {"matern", {{"smoothness", 0}}}}}};
  EXPECT_EQ(field_of([&] { experiment_config_from_json(doc); }), "matern.smoothness");
}

TEST(ExperimentConfigJson, RelativeDatasetResolves) {
  const auto c = experiment_config_from_json(json{{"dataset", "data/x.csv"}}, "/tmp/base");
  EXPECT_EQ(c.dataset, std::filesystem::path("/tmp/base/data/x.csv"));
}

TEST(ExperimentConfigJson, RoundTrip) {
  auto c = experiment_config_from_json(json{{"simulation", "ordinal-strong-hetero-strong-spatial"},
                                            {"weights", {"W1", "W2"}},
                                            {"target", "ordinal"},
                                            {"folds", 4}});
  const auto back = experiment_config_from_json(experiment_config_to_json(c));
  EXPECT_EQ(experiment_config_to_json(back), experiment_config_to_json(c));
}

TEST(ConfigHash, KeyOrderInsensitive) {
  const auto a = json::parse(R"({"a": 1, "b": [1, 2]})");
  const auto b = json::parse(R"({"b": [1, 2], "a": 1})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(json::parse(R"({"a": 2, "b": [1, 2]})")));
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(ConfigHash, KnownFnvValue) {
  // FNV-1a of the empty object text "{}".
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : std::string("{}")) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  EXPECT_EQ(config_hash(json::object()), h);
}

TEST(Names, ParseAndPrint) {
  EXPECT_EQ(mode_from_string("SL0"), Mode::SL0);
  EXPECT_EQ(to_string(Mode::Baseline), "Baseline");
  EXPECT_EQ(weight_scheme_from_string("W2"), WeightScheme::W2);
  EXPECT_EQ(sensitivity_rule_from_string("step"), SensitivityRule::Step);
  EXPECT_THROW(mode_from_string("SL2"), ConfigError);
}
