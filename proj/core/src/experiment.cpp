#include "mrsl/experiment.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

#include "mrsl/error.hpp"
#include "mrsl/parallel.hpp"
#include "mrsl/random.hpp"

namespace mrsl {

namespace {

constexpr std::uint64_t kOuterFoldStream = 11;
constexpr std::uint64_t kInnerSeedStream = 12;

struct Group {
  std::string label;
  std::vector<LearnerSpec> specs;
  std::vector<Variant> variants;
};

std::vector<Group> make_groups(const ExperimentConfig& c, Target target) {
  auto variants = [&](bool allow_baseline) {
    std::vector<Variant> out;
    for (Mode m : c.modes) {
      if (m == Mode::Baseline) {
        if (allow_baseline) out.push_back({m, WeightScheme::W1});
      } else if (target == Target::Binary) {
        out.push_back({m, WeightScheme::W1});
      } else {
        for (WeightScheme w : c.schemes) out.push_back({m, w});
      }
    }
    return out;
  };
  std::vector<Group> groups;
  for (const auto& s : c.learners) groups.push_back({std::string(to_string(s.kind)), {s}, variants(true)});
  if (c.combine_learners && c.learners.size() > 1) {
    std::string label;
    for (const auto& s : c.learners) label += (label.empty() ? "" : "+") + std::string(to_string(s.kind));
    Group g{label, c.learners, variants(false)};
    if (!g.variants.empty()) groups.push_back(std::move(g));
  }
  return groups;
}

struct Pooled {
  std::vector<double> score;   // binary: P(c = 1)
  std::vector<int> category;   // ordinal: predicted G
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nan("");
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

nlohmann::json num_or_na(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json("NA"); }

// ".747 (.035)" style used in the binary table.
std::string mean_sd(double m, double sd) {
  auto three = [](double x) {
    if (!std::isfinite(x)) return std::string("NA");
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << x;
    std::string s = os.str();
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    return s;
  };
  return three(m) + " (" + three(sd) + ")";
}

std::string row_label(const CellResult& c) {
  std::string s = std::string(to_string(c.mode));
  if (c.scheme) s += " + " + std::string(to_string(*c.scheme));
  return s;
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (!c.simulation && c.dataset.empty()) throw ConfigError("simulation", "give a simulation or a dataset");
  if (c.simulation) validate(*c.simulation);
  if (c.learners.empty()) throw ConfigError("learners", "at least one learner is required");
  for (const auto& s : c.learners) validate(s);
  if (c.modes.empty()) throw ConfigError("modes", "at least one mode is required");
  if (c.schemes.empty()) throw ConfigError("weights", "at least one weight scheme is required");
  if (c.max_resolution < 1) throw ConfigError("resolutions", "must be >= 1");
  if (c.folds < 2) throw ConfigError("folds", "must be >= 2");
  if (c.inner_folds != 0 && c.inner_folds < 2) throw ConfigError("inner_folds", "must be 0 or >= 2");
  if (c.replicates < 1) throw ConfigError("replicates", "must be >= 1");
  if (c.jobs < 1) throw ConfigError("jobs", "must be >= 1");
  if (c.bandwidth_grid.empty()) throw ConfigError("bandwidth_grid", "must not be empty");
  for (double h : c.bandwidth_grid)
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("bandwidth_grid", "entries must be finite and > 0");
}

std::size_t ExperimentResult::failures() const noexcept {
  std::size_t n = 0;
  for (const auto& r : replicates) n += r.ok ? 0 : 1;
  return n;
}

std::vector<CellResult> evaluate_dataset(const Dataset& data, const ExperimentConfig& config,
                                         std::uint64_t seed, int jobs, const ProgressSink& progress) {
  data.validate();
  const Target target = config.target.value_or(data.num_levels > 2 ? Target::Ordinal : Target::Binary);
  const auto groups = make_groups(config, target);
  const FoldAssignment outer = make_folds(data.subjects.size(), config.folds, derive_seed(seed, kOuterFoldStream));

  // pooled[fold][group][variant]
  std::vector<std::vector<std::vector<Pooled>>> pooled(static_cast<std::size_t>(outer.num_folds));
  std::vector<std::vector<int>> truth(static_cast<std::size_t>(outer.num_folds));
  std::mutex log_mutex;
  parallel_for(static_cast<std::size_t>(outer.num_folds), jobs, [&](std::size_t f) {
    const int v = static_cast<int>(f) + 1;
    const Dataset train = subset(data, outer.complement(v));
    const auto held = outer.members(v);
    for (auto i : held) {
      const auto& s = data.subjects[i];
      const auto& src = target == Target::Binary ? s.cancer : s.grade;
      truth[f].insert(truth[f].end(), src.begin(), src.end());
    }
    pooled[f].resize(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      SuperLearnerConfig sc;
      sc.specs = groups[g].specs;
      sc.max_resolution = config.max_resolution;
      sc.folds = config.inner_folds > 0 ? config.inner_folds : config.folds;
      sc.target = target;
      sc.stage_one_output = config.stage_one_output;
      sc.bandwidth_grid = config.bandwidth_grid;
      sc.criterion = config.criterion;
      sc.seed = derive_seed(derive_seed(seed, kInnerSeedStream), f);
      sc.jobs = 1;
      sc.fold_reports = false;
      const auto models = train_superlearners(train, sc, groups[g].variants);
      pooled[f][g].resize(models.size());
      for (std::size_t m = 0; m < models.size(); ++m)
        for (auto i : held) {
          const SubjectPrediction p = predict_superlearner(models[m], data.subjects[i]);
          auto& dst = pooled[f][g][m];
          if (target == Target::Binary) {
            for (Eigen::Index j = 0; j < p.proba.rows(); ++j) dst.score.push_back(p.proba(j, 1));
          } else {
            dst.category.insert(dst.category.end(), p.category.begin(), p.category.end());
          }
        }
    }
    if (progress) {
      std::lock_guard lock(log_mutex);
      progress("  fold " + std::to_string(v) + "/" + std::to_string(outer.num_folds) + " done");
    }
  });

  std::vector<int> all_truth;
  for (const auto& t : truth) all_truth.insert(all_truth.end(), t.begin(), t.end());
  std::vector<CellResult> cells;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t m = 0; m < groups[g].variants.size(); ++m) {
      Pooled all;
      for (std::size_t f = 0; f < pooled.size(); ++f) {
        const auto& p = pooled[f][g][m];
        all.score.insert(all.score.end(), p.score.begin(), p.score.end());
        all.category.insert(all.category.end(), p.category.begin(), p.category.end());
      }
      CellResult cell;
      cell.learner = groups[g].label;
      cell.mode = groups[g].variants[m].mode;
      if (target == Target::Binary) {
        cell.binary = binary_metrics(all.score, all_truth, config.sensitivity_rule);
      } else {
        if (cell.mode != Mode::Baseline) cell.scheme = groups[g].variants[m].scheme;
        cell.table = confusion_table(all.category, all_truth, data.num_levels);
        cell.rates = category_rates(*cell.table);
      }
      cells.push_back(std::move(cell));
    }
  return cells;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressSink& progress) {
  validate(config);
  ExperimentResult result;
  std::optional<Dataset> fixed;
  if (!config.simulation) fixed = load_dataset(config.dataset);
  const int levels = config.simulation ? config.simulation->num_levels : fixed->num_levels;
  result.target = config.target.value_or(levels > 2 ? Target::Ordinal : Target::Binary);
  result.num_levels = result.target == Target::Binary ? 2 : levels;
  result.replicates.resize(static_cast<std::size_t>(config.replicates));

  std::mutex log_mutex;
  parallel_for(result.replicates.size(), config.jobs, [&](std::size_t r) {
    ReplicateResult& rep = result.replicates[r];
    rep.replicate = static_cast<int>(r) + 1;
    rep.seed = derive_seed(config.seed, r);
    try {
      Dataset data;
      if (config.simulation) {
        SimConfig sim = *config.simulation;
        sim.seed = rep.seed;
        data = simulate_dataset(sim);
      } else {
        data = *fixed;
      }
      rep.cells = evaluate_dataset(data, config, rep.seed, 1);
      rep.ok = true;
    } catch (const std::exception& e) {
      rep.ok = false;
      rep.error = e.what();
    }
    if (progress) {
      std::lock_guard lock(log_mutex);
      progress("replicate " + std::to_string(rep.replicate) + "/" + std::to_string(config.replicates) +
               (rep.ok ? " done" : " FAILED: " + rep.error));
    }
  });
  return result;
}

nlohmann::json to_json(const ReplicateResult& rep) {
  nlohmann::json j{{"replicate", rep.replicate}, {"seed", rep.seed}, {"ok", rep.ok}};
  if (!rep.ok) j["error"] = rep.error;
  j["rows"] = nlohmann::json::array();
  for (const auto& c : rep.cells) {
    nlohmann::json row{{"learner", c.learner}, {"mode", to_string(c.mode)}};
    if (c.scheme) row["weights"] = to_string(*c.scheme);
    if (c.binary) row["metrics"] = to_json(*c.binary);
    if (c.table) row["table"] = to_json(*c.table);
    if (c.rates) row["rates"] = to_json(*c.rates);
    j["rows"].push_back(std::move(row));
  }
  return j;
}

namespace {

struct RowStats {
  std::string learner, label;
  std::vector<double> auc, s80, s90, error;
  std::vector<std::vector<std::vector<double>>> counts;  // [t][p] per replicate
  std::vector<std::vector<double>> fpr, fdr;             // [z] defined values
};

std::vector<RowStats> collect(const ExperimentResult& result) {
  std::vector<RowStats> rows;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  const auto z = static_cast<std::size_t>(result.num_levels);
  for (const auto& rep : result.replicates) {
    if (!rep.ok) continue;
    for (const auto& c : rep.cells) {
      const auto key = std::make_pair(c.learner, row_label(c));
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, rows.size()).first;
        RowStats r;
        r.learner = c.learner;
        r.label = key.second;
        r.counts.assign(z, std::vector<std::vector<double>>(z));
        r.fpr.assign(z, {});
        r.fdr.assign(z, {});
        rows.push_back(std::move(r));
      }
      RowStats& r = rows[it->second];
      if (c.binary) {
        r.auc.push_back(c.binary->auc);
        r.s80.push_back(c.binary->s80);
        r.s90.push_back(c.binary->s90);
      }
      if (c.table && c.rates) {
        for (std::size_t t = 0; t < z; ++t)
          for (std::size_t p = 0; p < z; ++p)
            r.counts[t][p].push_back(static_cast<double>(c.table->counts[t][p]));
        for (std::size_t k = 0; k < z; ++k) {
          if (c.rates->fpr[k]) r.fpr[k].push_back(*c.rates->fpr[k]);
          if (c.rates->fdr[k]) r.fdr[k].push_back(*c.rates->fdr[k]);
        }
        r.error.push_back(c.rates->overall_error);
      }
    }
  }
  return rows;
}

}  // namespace

nlohmann::json summarize(const ExperimentResult& result) {
  nlohmann::json j;
  j["target"] = to_string(result.target);
  j["replicates"] = result.replicates.size();
  j["failures"] = result.failures();
  j["failed"] = nlohmann::json::array();
  for (const auto& r : result.replicates)
    if (!r.ok) j["failed"].push_back({{"replicate", r.replicate}, {"error", r.error}});
  j["rows"] = nlohmann::json::array();
  for (const auto& r : collect(result)) {
    nlohmann::json row{{"learner", r.learner}, {"model", r.label}};
    auto ms = [](const std::vector<double>& v) {
      return nlohmann::json{{"mean", num_or_na(mean_of(v))}, {"sd", num_or_na(sd_of(v))}, {"n", v.size()}};
    };
    if (result.target == Target::Binary) {
      row["auc"] = ms(r.auc);
      row["s80"] = ms(r.s80);
      row["s90"] = ms(r.s90);
    } else {
      nlohmann::json counts = nlohmann::json::array();
      for (const auto& t : r.counts) {
        nlohmann::json line = nlohmann::json::array();
        for (const auto& p : t) line.push_back(mean_of(p));
        counts.push_back(line);
      }
      row["mean_counts"] = counts;
      row["fpr"] = nlohmann::json::array();
      row["fdr"] = nlohmann::json::array();
      for (std::size_t k = 0; k < r.fpr.size(); ++k) {
        row["fpr"].push_back(ms(r.fpr[k]));
        row["fdr"].push_back(ms(r.fdr[k]));
      }
      row["overall_error"] = ms(r.error);
    }
    j["rows"].push_back(std::move(row));
  }
  return j;
}

std::string format_summary(const ExperimentResult& result) {
  std::ostringstream os;
  const auto rows = collect(result);
  const std::size_t ok = result.replicates.size() - result.failures();
  os << "replicates: " << ok << " succeeded, " << result.failures() << " failed\n";
  if (result.target == Target::Binary) {
    os << std::left << std::setw(22) << "learner" << std::setw(12) << "model" << std::setw(16) << "AUC"
       << std::setw(16) << "S80" << std::setw(16) << "S90" << '\n';
    for (const auto& r : rows)
      os << std::left << std::setw(22) << r.learner << std::setw(12) << r.label << std::setw(16)
         << mean_sd(mean_of(r.auc), sd_of(r.auc)) << std::setw(16) << mean_sd(mean_of(r.s80), sd_of(r.s80))
         << std::setw(16) << mean_sd(mean_of(r.s90), sd_of(r.s90)) << '\n';
  } else {
    const std::size_t z = static_cast<std::size_t>(result.num_levels);
    for (const auto& r : rows) {
      os << r.learner << "  " << r.label << '\n';
      os << std::right << std::setw(6) << "true";
      for (std::size_t p = 1; p <= z; ++p) os << std::setw(10) << p;
      os << std::setw(8) << "FPR" << std::setw(8) << "FDR" << std::setw(8) << "error" << '\n';
      for (std::size_t t = 0; t < z; ++t) {
        os << std::setw(6) << t + 1;
        for (std::size_t p = 0; p < z; ++p) os << std::setw(10) << std::llround(mean_of(r.counts[t][p]));
        auto rate = [](const std::vector<double>& v) {
          return v.empty() ? std::string("NA") : format_rate(mean_of(v));
        };
        os << std::setw(8) << rate(r.fpr[t]) << std::setw(8) << rate(r.fdr[t]);
        if (t == 0) os << std::setw(8) << format_rate(mean_of(r.error));
        os << '\n';
      }
    }
  }
  for (const auto& rep : result.replicates)
    if (!rep.ok) os << "FAILED replicate " << rep.replicate << ": " << rep.error << '\n';
  return os.str();
}

}  // namespace mrsl
