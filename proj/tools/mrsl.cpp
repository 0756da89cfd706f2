// mrsl: simulate, train, predict, evaluate, experiment, bandwidth.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mrsl/config.hpp"
#include "mrsl/data.hpp"
#include "mrsl/error.hpp"
#include "mrsl/experiment.hpp"
#include "mrsl/log.hpp"
#include "mrsl/metrics.hpp"
#include "mrsl/simgen.hpp"
#include "mrsl/stacking.hpp"
#include "toml_lite.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

int default_jobs() {
  if (const char* env = std::getenv("MRSL_JOBS")) {
    try {
      const int j = std::stoi(env);
      if (j >= 1) return j;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring MRSL_JOBS='" << env << "'\n";
  }
  return 1;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw mrsl::ConfigError("bandwidth_grid", "cannot parse '" + item + "'");
    }
  }
  if (grid.empty()) throw mrsl::ConfigError("bandwidth_grid", "must not be empty");
  return grid;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mrsl::Error("cannot write " + path.string());
  out << text;
  if (!out) throw mrsl::Error("write failed for " + path.string());
}

void write_provenance(const fs::path& output, const std::string& command, const json& config,
                      std::uint64_t seed) {
  const json doc{{"command", command},
                 {"config_hash", mrsl::hex64(mrsl::config_hash(config))},
                 {"seed", seed},
                 {"tool_version", MRSL_VERSION},
                 {"config", config}};
  write_file(fs::path(output.string() + ".provenance.json"), doc.dump(2) + "\n");
}

json load_section(const std::string& path, const char* section) {
  if (path.empty()) return json::object();
  json doc = mrsl::tools::load_config_file(path);
  if (doc.contains(section) && doc[section].is_object()) return doc[section];
  return doc;
}

// Ordinal only when some voxel carries a grade above 2; a CSV does not record Z.
mrsl::Target default_target(const mrsl::Dataset& data) {
  if (data.num_levels <= 2) return mrsl::Target::Binary;
  for (const auto& s : data.subjects)
    for (int g : s.grade)
      if (g > 2) return mrsl::Target::Ordinal;
  return mrsl::Target::Binary;
}

// Shared model flags for train and bandwidth.
struct ModelFlags {
  std::string config;
  std::vector<std::string> learners;
  std::optional<int> resolutions;
  std::optional<int> folds;
  std::string grid;
  std::string target;
  std::string criterion;
  std::string stage_one_output;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "model config file (JSON or TOML)");
    cmd->add_option("--learner", learners, "base learner(s): glm, qda, rf, ordered_probit");
    cmd->add_option("--resolutions", resolutions, "maximum resolution K");
    cmd->add_option("--folds", folds, "cross-validation folds V");
    cmd->add_option("--bandwidth-grid", grid, "comma-separated bandwidths");
    cmd->add_option("--target", target, "binary or ordinal (default from the data)");
    cmd->add_option("--criterion", criterion, "bandwidth criterion: max_auc or min_error");
    cmd->add_option("--stage-one-output", stage_one_output, "class_probabilities or predicted_category");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--jobs", jobs, "worker threads (default $MRSL_JOBS or 1)");
  }

  mrsl::SuperLearnerConfig resolve(const mrsl::Dataset& data, json& effective) const {
    json doc = load_section(config, "model");
    if (!learners.empty()) doc["learners"] = learners;
    if (resolutions) doc["resolutions"] = *resolutions;
    if (folds) doc["folds"] = *folds;
    if (!grid.empty()) doc["bandwidth_grid"] = parse_grid(grid);
    if (!target.empty()) doc["target"] = target;
    if (!doc.contains("target")) doc["target"] = mrsl::to_string(default_target(data));
    if (!criterion.empty()) doc["criterion"] = criterion;
    if (!stage_one_output.empty()) doc["stage_one_output"] = stage_one_output;
    if (seed) doc["seed"] = *seed;
    doc.erase("jobs");
    effective = doc;
    mrsl::SuperLearnerConfig c = mrsl::superlearner_config_from_json(doc);
    c.jobs = jobs;
    return c;
  }
};

int cmd_simulate(const std::string& config_path, const std::string& preset, std::optional<std::uint64_t> seed,
                 std::optional<int> subjects, const fs::path& out, int jobs) {
  json doc = load_section(config_path, "simulation");
  if (doc.is_string()) doc = json{{"preset", doc}};
  if (!preset.empty()) doc["preset"] = preset;
  if (seed) doc["seed"] = *seed;
  if (subjects) doc["subjects"] = *subjects;
  if (!doc.contains("preset") && !doc.contains("mean"))
    throw mrsl::ConfigError("preset", "give --preset or a config with a preset or feature means");
  const mrsl::SimConfig sim = mrsl::sim_config_from_json(doc);
  std::cerr << "simulating " << sim.subjects << " subjects (seed " << sim.seed << ")\n";
  const mrsl::Dataset data = mrsl::simulate_dataset(sim, jobs);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  mrsl::save_dataset(out, data);
  write_provenance(out, "simulate", mrsl::sim_config_to_json(sim), sim.seed);
  std::cerr << "wrote " << out << " (" << data.total_voxels() << " voxels)\n";
  return 0;
}

int cmd_train(const fs::path& data_path, const ModelFlags& flags, const std::string& mode_name,
              const std::string& weights, const fs::path& out) {
  const mrsl::Dataset data = mrsl::load_dataset(data_path);
  json effective;
  const mrsl::SuperLearnerConfig config = flags.resolve(data, effective);
  const mrsl::Mode mode = mrsl::mode_from_string(mode_name.empty() ? "SL" : mode_name);
  const mrsl::WeightScheme scheme = mrsl::weight_scheme_from_string(weights.empty() ? "W1" : weights);
  effective["mode"] = mrsl::to_string(mode);
  effective["weights"] = mrsl::to_string(scheme);
  std::cerr << "training " << mrsl::to_string(mode) << " on " << data.subjects.size() << " subjects\n";
  const mrsl::SuperLearnerModel model = mrsl::train_superlearner(data, config, mode, scheme);
  write_file(out, mrsl::superlearner_to_json(model).dump() + "\n");
  const std::string report = mrsl::format_stage_two_report(model);
  std::cerr << report;
  write_file(fs::path(out.string() + ".log"), report);
  write_provenance(out, "train", effective, config.seed);
  return 0;
}

mrsl::SuperLearnerModel load_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw mrsl::Error("cannot open model " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw mrsl::SchemaError(std::string("model file is not JSON: ") + e.what());
  }
  return mrsl::superlearner_from_json(doc);
}

void check_compatible(const mrsl::SuperLearnerModel& model, const mrsl::Dataset& data) {
  const int dim = model.stage_one.front().dim();
  if (static_cast<std::size_t>(dim) != data.dim())
    throw mrsl::DimensionError("model expects " + std::to_string(dim) + " features, data has " +
                               std::to_string(data.dim()));
  if (model.target == mrsl::Target::Ordinal && data.num_levels != model.num_levels)
    throw mrsl::DimensionError("model has " + std::to_string(model.num_levels) + " ordinal levels, data has " +
                               std::to_string(data.num_levels));
}

int cmd_predict(const fs::path& model_path, const fs::path& data_path, const fs::path& out) {
  const auto model = load_model(model_path);
  const auto data = mrsl::load_dataset(data_path);
  check_compatible(model, data);
  std::ostringstream os;
  os.precision(17);
  os << "subject,voxel,x,y";
  for (int c = 0; c < model.num_classes(); ++c) os << ",p" << c;
  os << ",category\n";
  for (const auto& s : data.subjects) {
    const auto p = mrsl::predict_superlearner(model, s);
    for (std::size_t j = 0; j < s.size(); ++j) {
      os << s.id << ',' << j << ',' << s.coords[j].x << ',' << s.coords[j].y;
      for (Eigen::Index c = 0; c < p.proba.cols(); ++c) os << ',' << p.proba(static_cast<Eigen::Index>(j), c);
      os << ',' << p.category[j] << '\n';
    }
  }
  write_file(out, os.str());
  std::cerr << "wrote " << out << "\n";
  return 0;
}

int cmd_evaluate(const fs::path& model_path, const fs::path& data_path, const fs::path& out,
                 const std::string& rule_name) {
  const auto model = load_model(model_path);
  const auto data = mrsl::load_dataset(data_path);
  check_compatible(model, data);
  const auto rule = mrsl::sensitivity_rule_from_string(rule_name.empty() ? "interpolate" : rule_name);
  json report{{"mode", mrsl::to_string(model.mode)}, {"target", mrsl::to_string(model.target)}};
  std::ostringstream text;
  if (model.target == mrsl::Target::Binary) {
    std::vector<double> scores;
    std::vector<int> labels;
    json per_subject = json::array();
    for (const auto& s : data.subjects) {
      const auto p = mrsl::predict_superlearner(model, s);
      std::vector<double> sub(static_cast<std::size_t>(p.proba.rows()));
      for (Eigen::Index j = 0; j < p.proba.rows(); ++j) sub[static_cast<std::size_t>(j)] = p.proba(j, 1);
      const bool both = std::count(s.cancer.begin(), s.cancer.end(), 1) > 0 &&
                        std::count(s.cancer.begin(), s.cancer.end(), 0) > 0;
      per_subject.push_back({{"subject", s.id}, {"auc", both ? json(mrsl::roc_auc(sub, s.cancer)) : json("NA")}});
      scores.insert(scores.end(), sub.begin(), sub.end());
      labels.insert(labels.end(), s.cancer.begin(), s.cancer.end());
    }
    const auto m = mrsl::binary_metrics(scores, labels, rule);
    report["metrics"] = mrsl::to_json(m);
    report["per_subject_auc"] = per_subject;
    text.setf(std::ios::fixed);
    text.precision(3);
    text << "AUC " << m.auc << "  S80 " << m.s80 << "  S90 " << m.s90 << '\n';
  } else {
    std::vector<int> pred, truth;
    for (const auto& s : data.subjects) {
      const auto p = mrsl::predict_superlearner(model, s);
      pred.insert(pred.end(), p.category.begin(), p.category.end());
      truth.insert(truth.end(), s.grade.begin(), s.grade.end());
    }
    const auto table = mrsl::confusion_table(pred, truth, model.num_levels);
    const auto rates = mrsl::category_rates(table);
    report["table"] = mrsl::to_json(table);
    report["rates"] = mrsl::to_json(rates);
    text << mrsl::format_category_table(table, rates);
  }
  std::cout << text.str();
  if (!out.empty()) {
    write_file(out, report.dump(2) + "\n");
    write_file(fs::path(out.string() + ".txt"), text.str());
  }
  return 0;
}

int cmd_experiment(const std::string& config_path, const json& overrides, const fs::path& out) {
  json doc = mrsl::tools::load_config_file(config_path);
  for (const auto& [k, v] : overrides.items()) doc[k] = v;
  const int jobs = doc.value("jobs", 1);
  doc.erase("jobs");
  mrsl::ExperimentConfig config =
      mrsl::experiment_config_from_json(doc, fs::path(config_path).parent_path());
  config.jobs = jobs;
  const json effective = mrsl::experiment_config_to_json(config);
  std::cerr << "experiment: " << config.replicates << " replicate(s), " << config.jobs << " job(s)\n";
  const auto result = mrsl::run_experiment(config, [](std::string_view msg) { std::cerr << msg << '\n'; });

  fs::create_directories(out);
  std::string lines;
  for (const auto& r : result.replicates) lines += mrsl::to_json(r).dump() + "\n";
  write_file(out / "replicates.jsonl", lines);
  write_file(out / "summary.json", mrsl::summarize(result).dump(2) + "\n");
  const std::string table = mrsl::format_summary(result);
  write_file(out / "summary.txt", table);
  write_provenance(out / "summary.json", "experiment", effective, config.seed);
  std::cout << table;
  return result.failures() == 0 ? 0 : kExitFailure;
}

int cmd_bandwidth(const fs::path& data_path, const ModelFlags& flags, const fs::path& out) {
  const auto data = mrsl::load_dataset(data_path);
  json effective;
  const auto config = flags.resolve(data, effective);
  const auto folds = mrsl::make_folds(data.subjects.size(), config.folds, config.seed);
  const auto cv = mrsl::cv_stage1(data, config.specs, config.max_resolution, config.target, folds, config.jobs);
  std::vector<std::vector<int>> labels(data.subjects.size());
  for (std::size_t i = 0; i < data.subjects.size(); ++i)
    for (std::size_t j = 0; j < data.subjects[i].size(); ++j)
      labels[i].push_back(mrsl::class_label(data.subjects[i], j, config.target));
  json report = json::array();
  std::ostringstream text;
  text.setf(std::ios::fixed);
  text.precision(4);
  for (std::size_t s = 0; s < config.specs.size(); ++s) {
    std::vector<mrsl::ImagePredictions> images;
    for (std::size_t i = 0; i < data.subjects.size(); ++i)
      images.push_back({data.subjects[i].coords, cv.raw[s][i], labels[i]});
    const auto set = mrsl::select_bandwidths(images, config.bandwidth_grid, config.effective_criterion(), config.jobs);
    text << mrsl::to_string(config.specs[s].kind) << " (" << mrsl::to_string(set.criterion) << ")\n";
    for (int k = 1; k <= config.max_resolution; ++k) {
      text << "  k=" << k << "  h=" << set.at(k) << "  scores:";
      for (double v : set.scores[static_cast<std::size_t>(k - 1)]) text << ' ' << v;
      text << '\n';
    }
    report.push_back({{"learner", mrsl::to_string(config.specs[s].kind)},
                      {"grid", config.bandwidth_grid},
                      {"bandwidths", mrsl::bandwidths_to_json(set)}});
  }
  std::cout << text.str();
  if (!out.empty()) {
    write_file(out, report.dump(2) + "\n");
    write_provenance(out, "bandwidth", effective, config.seed);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-resolution super learner for voxel-wise classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(MRSL_VERSION));
  const int env_jobs = default_jobs();

  // simulate
  std::string sim_config, sim_preset;
  std::optional<std::uint64_t> sim_seed;
  std::optional<int> sim_subjects;
  std::string sim_out;
  int sim_jobs = env_jobs;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim->add_option("--config", sim_config, "simulation config (JSON or TOML)");
  sim->add_option("--preset", sim_preset, "named preset, e.g. strong-hetero-strong-spatial");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--subjects", sim_subjects, "number of subjects");
  sim->add_option("--out", sim_out, "output dataset (.csv or .json)")->required();
  sim->add_option("--jobs", sim_jobs, "worker threads");

  // train
  ModelFlags train_flags;
  train_flags.jobs = env_jobs;
  std::string train_data, train_out, train_mode, train_weights;
  auto* train = app.add_subcommand("train", "train a super learner");
  train->add_option("--data", train_data, "training dataset")->required();
  train->add_option("--out", train_out, "output model JSON")->required();
  train->add_option("--mode", train_mode, "Baseline, SL0 or SL (default SL)");
  train->add_option("--weights", train_weights, "stage-two weights for ordinal targets: W1 or W2");
  train_flags.add(train);

  // predict
  std::string pred_model, pred_data, pred_out;
  auto* predict = app.add_subcommand("predict", "per-voxel predictions");
  predict->add_option("--model", pred_model, "model JSON")->required();
  predict->add_option("--data", pred_data, "dataset")->required();
  predict->add_option("--out", pred_out, "output CSV")->required();

  // evaluate
  std::string eval_model, eval_data, eval_out, eval_rule;
  auto* evaluate = app.add_subcommand("evaluate", "metric report for a model on a dataset");
  evaluate->add_option("--model", eval_model, "model JSON")->required();
  evaluate->add_option("--data", eval_data, "dataset")->required();
  evaluate->add_option("--out", eval_out, "JSON report (text copy written alongside)");
  evaluate->add_option("--sensitivity-rule", eval_rule, "interpolate (default) or step");

  // experiment
  std::string exp_config, exp_out, exp_grid, exp_weights;
  std::vector<std::string> exp_modes, exp_learners;
  std::optional<int> exp_replicates, exp_resolutions, exp_folds;
  std::optional<std::uint64_t> exp_seed;
  int exp_jobs = env_jobs;
  auto* experiment = app.add_subcommand("experiment", "replicated cross-validated comparison");
  experiment->add_option("--config", exp_config, "experiment config (JSON or TOML)")->required();
  experiment->add_option("--out", exp_out, "output directory")->required();
  experiment->add_option("--seed", exp_seed, "experiment seed");
  experiment->add_option("--jobs", exp_jobs, "parallel replicates");
  experiment->add_option("--replicates", exp_replicates, "replicate count R");
  experiment->add_option("--mode", exp_modes, "modes to compare");
  experiment->add_option("--learner", exp_learners, "base learners");
  experiment->add_option("--weights", exp_weights, "W1, W2 or W1,W2");
  experiment->add_option("--resolutions", exp_resolutions, "maximum resolution K");
  experiment->add_option("--folds", exp_folds, "cross-validation folds V");
  experiment->add_option("--bandwidth-grid", exp_grid, "comma-separated bandwidths");

  // bandwidth
  ModelFlags bw_flags;
  bw_flags.jobs = env_jobs;
  std::string bw_data, bw_out;
  auto* bandwidth = app.add_subcommand("bandwidth", "cross-validated bandwidth search");
  bandwidth->add_option("--data", bw_data, "dataset")->required();
  bandwidth->add_option("--out", bw_out, "JSON report");
  bw_flags.add(bandwidth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  mrsl::set_warning_sink([](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; });
  try {
    if (*sim) return cmd_simulate(sim_config, sim_preset, sim_seed, sim_subjects, sim_out, sim_jobs);
    if (*train) return cmd_train(train_data, train_flags, train_mode, train_weights, train_out);
    if (*predict) return cmd_predict(pred_model, pred_data, pred_out);
    if (*evaluate) return cmd_evaluate(eval_model, eval_data, eval_out, eval_rule);
    if (*experiment) {
      json overrides = json::object();
      if (exp_seed) overrides["seed"] = *exp_seed;
      if (exp_replicates) overrides["replicates"] = *exp_replicates;
      if (!exp_modes.empty()) overrides["modes"] = exp_modes;
      if (!exp_learners.empty()) overrides["learners"] = exp_learners;
      if (!exp_weights.empty()) {
        json w = json::array();
        std::stringstream ss(exp_weights);
        std::string item;
        while (std::getline(ss, item, ',')) w.push_back(item);
        overrides["weights"] = w;
      }
      if (exp_resolutions) overrides["resolutions"] = *exp_resolutions;
      if (exp_folds) overrides["folds"] = *exp_folds;
      if (!exp_grid.empty()) overrides["bandwidth_grid"] = parse_grid(exp_grid);
      overrides["jobs"] = exp_jobs;
      return cmd_experiment(exp_config, overrides, exp_out);
    }
    if (*bandwidth) return cmd_bandwidth(bw_data, bw_flags, bw_out);
  } catch (const mrsl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const mrsl::tools::TomlError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
