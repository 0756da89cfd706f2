#include "mrsl/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>
#include <variant>

#include "mrsl/error.hpp"
#include "mrsl/parallel.hpp"
#include "mrsl/random.hpp"

namespace mrsl {

namespace {

constexpr int kModelFormat = 1;

int argmax_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(row, c) > m(row, best)) best = static_cast<int>(c);
  return best;
}

std::vector<int> outcome_labels(const Dataset& data, Target target) {
  std::vector<int> out;
  out.reserve(data.total_voxels());
  for (const auto& s : data.subjects) {
    const auto& src = target == Target::Binary ? s.cancer : s.grade;
    out.insert(out.end(), src.begin(), src.end());
  }
  return out;
}

std::vector<std::string> column_names(std::span<const LearnerSpec> specs, int max_resolution,
                                      Target target, StageOneOutput output, int num_levels) {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const std::string prefix = std::string(to_string(specs[s].kind)) + (specs.size() > 1 ? "#" + std::to_string(s) : "");
    for (int k = 1; k <= max_resolution; ++k) {
      const std::string base = prefix + ".k" + std::to_string(k);
      if (target == Target::Binary) {
        names.push_back(base);
      } else if (output == StageOneOutput::PredictedCategory) {
        names.push_back(base + ".category");
      } else {
        for (int z = 1; z < num_levels; ++z) names.push_back(base + ".p" + std::to_string(z));
      }
    }
  }
  return names;
}

// Rows of `all` belonging to the given subjects, in subject order.
Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& all, const std::vector<std::size_t>& offsets,
                            const Dataset& data, std::span<const std::size_t> subjects,
                            std::span<const int> labels, std::vector<int>& picked) {
  std::size_t rows = 0;
  for (auto i : subjects) rows += data.subjects[i].size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), all.cols());
  picked.clear();
  Eigen::Index r = 0;
  for (auto i : subjects) {
    const auto n = static_cast<Eigen::Index>(data.subjects[i].size());
    out.middleRows(r, n) = all.middleRows(static_cast<Eigen::Index>(offsets[i]), n);
    picked.insert(picked.end(), labels.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                  labels.begin() + static_cast<std::ptrdiff_t>(offsets[i]) + n);
    r += n;
  }
  return out;
}

nlohmann::json folds_to_json(const FoldAssignment& f) {
  return {{"num_folds", f.num_folds}, {"seed", f.seed}, {"fold", f.fold}};
}

FoldAssignment folds_from_json(const nlohmann::json& j) {
  FoldAssignment f;
  f.num_folds = j.at("num_folds").get<int>();
  f.seed = j.at("seed").get<std::uint64_t>();
  f.fold = j.at("fold").get<std::vector<int>>();
  return f;
}

}  // namespace

std::string_view to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::Baseline: return "Baseline";
    case Mode::SL0: return "SL0";
    case Mode::SL: return "SL";
  }
  return "?";
}

std::string_view to_string(WeightScheme scheme) noexcept {
  return scheme == WeightScheme::W1 ? "W1" : "W2";
}

std::string_view to_string(StageOneOutput output) noexcept {
  return output == StageOneOutput::ClassProbabilities ? "class_probabilities" : "predicted_category";
}

Mode mode_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "baseline") return Mode::Baseline;
  if (lower == "sl0") return Mode::SL0;
  if (lower == "sl") return Mode::SL;
  throw ConfigError("mode", "unknown mode '" + std::string(name) + "' (Baseline, SL0, SL)");
}

WeightScheme weight_scheme_from_string(std::string_view name) {
  if (name == "W1" || name == "w1") return WeightScheme::W1;
  if (name == "W2" || name == "w2") return WeightScheme::W2;
  throw ConfigError("weights", "unknown weight scheme '" + std::string(name) + "' (W1, W2)");
}

StageOneOutput stage_one_output_from_string(std::string_view name) {
  if (name == "class_probabilities") return StageOneOutput::ClassProbabilities;
  if (name == "predicted_category") return StageOneOutput::PredictedCategory;
  throw ConfigError("stage_one_output", "unknown value '" + std::string(name) +
                                            "' (class_probabilities, predicted_category)");
}

std::vector<std::size_t> FoldAssignment::members(int v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == v) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(int v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] != v) out.push_back(i);
  return out;
}

FoldAssignment make_folds(std::size_t num_subjects, int num_folds, std::uint64_t seed) {
  if (num_folds < 2) throw ConfigError("folds", "need at least 2 folds");
  if (static_cast<std::size_t>(num_folds) > num_subjects)
    throw ConfigError("folds", std::to_string(num_folds) + " folds for " +
                                   std::to_string(num_subjects) + " subjects");
  std::vector<std::size_t> perm(num_subjects);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng rng(seed);
  for (std::size_t i = num_subjects; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  FoldAssignment f;
  f.num_folds = num_folds;
  f.seed = seed;
  f.fold.assign(num_subjects, 0);
  for (std::size_t pos = 0; pos < num_subjects; ++pos)
    f.fold[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(num_folds)) + 1;
  return f;
}

std::vector<double> compute_weights(std::span<const int> grades, int num_levels, WeightScheme scheme) {
  if (grades.empty()) throw Error("compute_weights: no labels");
  const auto n = static_cast<double>(grades.size());
  if (scheme == WeightScheme::W1) return std::vector<double>(grades.size(), 1.0 / n);
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_levels), 0);
  for (int g : grades) {
    if (g < 1 || g > num_levels) throw Error("compute_weights: grade outside 1..Z");
    ++counts[static_cast<std::size_t>(g - 1)];
  }
  for (int z = 1; z <= num_levels; ++z)
    if (counts[static_cast<std::size_t>(z - 1)] == 0)
      throw Error("compute_weights: W2 needs every category present; category " + std::to_string(z) +
                  " is empty");
  std::vector<double> w(grades.size());
  for (std::size_t i = 0; i < grades.size(); ++i)
    w[i] = 1.0 / (static_cast<double>(counts[static_cast<std::size_t>(grades[i] - 1)]) * num_levels);
  return w;
}

CvStageOne cv_stage1(const Dataset& train, std::span<const LearnerSpec> specs, int max_resolution,
                     Target target, const FoldAssignment& folds, int jobs) {
  if (folds.fold.size() != train.subjects.size())
    throw DimensionError("cv_stage1: fold assignment does not match the dataset");
  if (specs.empty()) throw ConfigError("learners", "at least one learner is required");
  const int num_classes = num_classes_for(target, train.num_levels);
  CvStageOne out;
  out.folds = folds;
  out.raw.assign(specs.size(), std::vector<ResolutionPredictions>(train.subjects.size()));

  for (int v = 1; v <= folds.num_folds; ++v) {
    std::vector<bool> present(static_cast<std::size_t>(num_classes), false);
    int distinct = 0;
    for (auto i : folds.complement(v)) {
      const auto& s = train.subjects[i];
      for (std::size_t j = 0; j < s.size(); ++j) {
        const auto c = static_cast<std::size_t>(class_label(s, j, target));
        if (!present[c]) ++distinct;
        present[c] = true;
      }
    }
    if (distinct < 2)
      throw FitError("cv_stage1: training half of fold " + std::to_string(v) + " has a single class");
  }

  const std::size_t tasks = specs.size() * static_cast<std::size_t>(folds.num_folds);
  parallel_for(tasks, jobs, [&](std::size_t t) {
    const std::size_t s = t / static_cast<std::size_t>(folds.num_folds);
    const int v = static_cast<int>(t % static_cast<std::size_t>(folds.num_folds)) + 1;
    const auto train_idx = folds.complement(v);
    const Dataset part = subset(train, train_idx);
    MultiResModel model;
    try {
      model = fit_multiresolution(part, specs[s], max_resolution, target, 1);
    } catch (const Error& e) {
      throw FitError("fold " + std::to_string(v) + ": " + e.what());
    }
    for (auto i : folds.members(v)) out.raw[s][i] = predict_multiresolution(model, train.subjects[i]);
  });
  return out;
}

Eigen::MatrixXd stage_one_covariates(std::span<const ResolutionPredictions> raw,
                                     std::span<const Coord> coords,
                                     std::span<const BandwidthSet> bandwidths, Target target,
                                     StageOneOutput output) {
  if (raw.empty()) throw Error("stage_one_covariates: no stage-one predictions");
  const bool smooth = !bandwidths.empty();
  if (smooth && bandwidths.size() != raw.size())
    throw DimensionError("stage_one_covariates: one bandwidth set per learner is required");
  const auto n = static_cast<Eigen::Index>(coords.size());
  const bool probs = target == Target::Ordinal && output == StageOneOutput::ClassProbabilities;

  // Per (spec, resolution) block of values to smooth, then the kept columns.
  struct Block {
    Eigen::MatrixXd values;
    double h = 0.0;
  };
  std::vector<Block> blocks;
  for (std::size_t s = 0; s < raw.size(); ++s) {
    for (std::size_t k = 0; k < raw[s].size(); ++k) {
      const Eigen::MatrixXd& p = raw[s][k];
      if (p.rows() != n) throw DimensionError("stage_one_covariates: prediction rows differ from voxels");
      Block b;
      if (target == Target::Binary) {
        b.values = p.col(1);
      } else if (probs) {
        b.values = p;
      } else {
        b.values.resize(n, 1);
        for (Eigen::Index j = 0; j < n; ++j) b.values(j, 0) = argmax_row(p, j) + 1;
      }
      if (smooth) b.h = bandwidths[s].at(static_cast<int>(k) + 1);
      blocks.push_back(std::move(b));
    }
  }

  if (smooth) {
    // One kernel pass per distinct bandwidth.
    std::map<double, std::vector<std::size_t>> by_h;
    for (std::size_t b = 0; b < blocks.size(); ++b) by_h[blocks[b].h].push_back(b);
    for (const auto& [h, members] : by_h) {
      Eigen::Index width = 0;
      for (auto b : members) width += blocks[b].values.cols();
      Eigen::MatrixXd wide(n, width);
      Eigen::Index c = 0;
      for (auto b : members) {
        wide.middleCols(c, blocks[b].values.cols()) = blocks[b].values;
        c += blocks[b].values.cols();
      }
      const Eigen::MatrixXd sm = nw_smooth_columns(wide, coords, h);
      c = 0;
      for (auto b : members) {
        const Eigen::Index w = blocks[b].values.cols();
        blocks[b].values = sm.middleCols(c, w);
        c += w;
        if (probs)
          for (Eigen::Index j = 0; j < n; ++j) {
            const double total = blocks[b].values.row(j).sum();
            if (total > 0.0) blocks[b].values.row(j) /= total;
          }
      }
    }
  }

  Eigen::Index cols = 0;
  for (const auto& b : blocks) cols += probs ? b.values.cols() - 1 : 1;
  Eigen::MatrixXd out(n, cols);
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    const Eigen::Index w = probs ? b.values.cols() - 1 : 1;
    out.middleCols(c, w) = b.values.leftCols(w);
    c += w;
  }
  return out;
}

FittedLearner fit_stage2_binary(const Eigen::MatrixXd& covariates, std::span<const int> cancer,
                                double ridge) {
  bool has0 = false, has1 = false;
  for (int c : cancer) (c == 1 ? has1 : has0) = true;
  if (!has0 || !has1) throw FitError("stage two: both classes must be present");
  return fit_probit(covariates, cancer, ridge);
}

FittedLearner fit_stage2_ordinal(const Eigen::MatrixXd& covariates, std::span<const int> grades,
                                 int num_levels, WeightScheme scheme, double ridge) {
  const std::vector<double> w = compute_weights(grades, num_levels, scheme);
  std::vector<int> labels(grades.size());
  for (std::size_t i = 0; i < grades.size(); ++i) labels[i] = grades[i] - 1;
  LearnerSpec spec;
  spec.kind = LearnerKind::OrderedProbit;
  spec.ridge = ridge;
  const FittedLearner fit = fit_ordered_probit(covariates, labels, num_levels, w, ridge);
  return FittedLearner(spec, fit.num_classes(), fit.dim(), fit.params());
}

BandwidthCriterion SuperLearnerConfig::effective_criterion() const noexcept {
  if (criterion) return *criterion;
  return target == Target::Binary ? BandwidthCriterion::MaxAuc : BandwidthCriterion::MinError;
}

void validate(const SuperLearnerConfig& c) {
  if (c.specs.empty()) throw ConfigError("learners", "at least one learner is required");
  for (const auto& s : c.specs) validate(s);
  if (c.max_resolution < 1) throw ConfigError("resolutions", "must be >= 1");
  if (c.folds < 2) throw ConfigError("folds", "must be >= 2");
  if (c.bandwidth_grid.empty()) throw ConfigError("bandwidth_grid", "must not be empty");
  for (double h : c.bandwidth_grid)
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("bandwidth_grid", "entries must be finite and > 0");
  if (!(c.stage_two_ridge >= 0.0)) throw ConfigError("stage_two_ridge", "must be >= 0");
  if (c.jobs < 1) throw ConfigError("jobs", "must be >= 1");
}

int SuperLearnerModel::num_classes() const noexcept { return num_classes_for(target, num_levels); }

SuperLearnerModel train_superlearner(const Dataset& train, const SuperLearnerConfig& config, Mode mode,
                                     WeightScheme scheme) {
  const Variant v{mode, scheme};
  return std::move(train_superlearners(train, config, std::span<const Variant>(&v, 1)).front());
}

std::vector<SuperLearnerModel> train_superlearners(const Dataset& train,
                                                   const SuperLearnerConfig& config,
                                                   std::span<const Variant> variants) {
  validate(config);
  train.validate();
  if (variants.empty()) return {};
  const bool any_stacked = std::any_of(variants.begin(), variants.end(), [](const Variant& v) { return v.mode != Mode::Baseline; });
  const bool any_sl = std::any_of(variants.begin(), variants.end(), [](const Variant& v) { return v.mode == Mode::SL; });
  const bool any_sl0 = std::any_of(variants.begin(), variants.end(), [](const Variant& v) { return v.mode == Mode::SL0; });
  const bool any_baseline = std::any_of(variants.begin(), variants.end(), [](const Variant& v) { return v.mode == Mode::Baseline; });
  if (any_baseline && config.specs.size() != 1)
    throw ConfigError("mode", "Baseline needs exactly one learner");

  const Target target = config.target;
  const int num_levels = target == Target::Binary ? 2 : train.num_levels;
  const int num_classes = num_classes_for(target, train.num_levels);
  const int kmax = any_stacked ? config.max_resolution : 1;
  const std::span<const LearnerSpec> specs(config.specs);

  // Final stage one on all training subjects. Its (1,1) cell is the base learner.
  std::vector<MultiResModel> full;
  for (const auto& spec : specs) full.push_back(fit_multiresolution(train, spec, kmax, target, config.jobs));

  FoldAssignment folds;
  CvStageOne cv;
  std::vector<BandwidthSet> bandwidths;
  Eigen::MatrixXd design_raw, design_smooth;
  std::vector<std::size_t> offsets;
  const std::vector<int> outcome = outcome_labels(train, target);
  if (any_stacked) {
    folds = make_folds(train.subjects.size(), config.folds, config.seed);
    cv = cv_stage1(train, specs, kmax, target, folds, config.jobs);

    if (any_sl) {
      std::vector<std::vector<int>> labels(train.subjects.size());
      for (std::size_t i = 0; i < train.subjects.size(); ++i) {
        const auto& s = train.subjects[i];
        for (std::size_t j = 0; j < s.size(); ++j) labels[i].push_back(class_label(s, j, target));
      }
      for (std::size_t s = 0; s < specs.size(); ++s) {
        std::vector<ImagePredictions> images;
        for (std::size_t i = 0; i < train.subjects.size(); ++i)
          images.push_back({train.subjects[i].coords, cv.raw[s][i], labels[i]});
        bandwidths.push_back(select_bandwidths(images, config.bandwidth_grid,
                                               config.effective_criterion(), config.jobs));
      }
    }

    const auto cols = static_cast<Eigen::Index>(
        column_names(specs, kmax, target, config.stage_one_output, num_levels).size());
    const auto total = static_cast<Eigen::Index>(train.total_voxels());
    if (any_sl0) design_raw.resize(total, cols);
    if (any_sl) design_smooth.resize(total, cols);
    std::size_t row = 0;
    for (std::size_t i = 0; i < train.subjects.size(); ++i) offsets.push_back(std::exchange(row, row + train.subjects[i].size()));
    parallel_for(train.subjects.size(), config.jobs, [&](std::size_t i) {
      std::vector<ResolutionPredictions> raw;
      for (std::size_t s = 0; s < specs.size(); ++s) raw.push_back(cv.raw[s][i]);
      const auto& subj = train.subjects[i];
      const auto r = static_cast<Eigen::Index>(offsets[i]);
      const auto n = static_cast<Eigen::Index>(subj.size());
      if (any_sl0)
        design_raw.middleRows(r, n) = stage_one_covariates(raw, subj.coords, {}, target, config.stage_one_output);
      if (any_sl)
        design_smooth.middleRows(r, n) =
            stage_one_covariates(raw, subj.coords, bandwidths, target, config.stage_one_output);
    });
  }

  auto fit_two = [&](const Eigen::MatrixXd& x, std::span<const int> y, WeightScheme scheme) {
    return target == Target::Binary ? fit_stage2_binary(x, y, config.stage_two_ridge)
                                    : fit_stage2_ordinal(x, y, num_levels, scheme, config.stage_two_ridge);
  };

  std::vector<SuperLearnerModel> models;
  for (const Variant& variant : variants) {
    SuperLearnerModel m;
    m.mode = variant.mode;
    m.target = target;
    m.num_levels = num_levels;
    m.scheme = variant.scheme;
    m.stage_one_output = config.stage_one_output;
    if (variant.mode == Mode::Baseline) {
      const MultiResModel& f = full.front();
      m.max_resolution = 1;
      m.stage_one.emplace_back(f.spec(), 1, target, num_classes, f.dim(),
                               std::vector<FittedLearner>{f.learner(1, 1)});
      models.push_back(std::move(m));
      continue;
    }
    m.max_resolution = kmax;
    m.stage_one = full;
    m.folds = folds;
    m.columns = column_names(specs, kmax, target, config.stage_one_output, num_levels);
    const Eigen::MatrixXd& x = variant.mode == Mode::SL ? design_smooth : design_raw;
    if (variant.mode == Mode::SL) m.bandwidths = bandwidths;
    try {
      m.stage_two = fit_two(x, outcome, variant.scheme);
      if (config.fold_reports) {
        for (int v = 1; v <= folds.num_folds; ++v) {
          std::vector<int> y;
          const auto idx = folds.complement(v);
          const Eigen::MatrixXd xv = gather_rows(x, offsets, train, idx, outcome, y);
          m.fold_stage_two.push_back(fit_two(xv, y, variant.scheme));
        }
      }
    } catch (const Error& e) {
      throw FitError(std::string("stage two (") + std::string(to_string(variant.mode)) + "): " + e.what());
    }
    models.push_back(std::move(m));
  }
  return models;
}

SubjectPrediction predict_superlearner(const SuperLearnerModel& model, const SubjectImage& subject) {
  if (model.stage_one.empty()) throw Error("predict_superlearner: model has no stage one");
  SubjectPrediction out;
  if (model.mode == Mode::Baseline) {
    out.proba = predict_multiresolution(model.stage_one.front(), subject).front();
  } else {
    if (!model.stage_two) throw Error("predict_superlearner: model has no stage two");
    std::vector<ResolutionPredictions> raw;
    for (const auto& s1 : model.stage_one) raw.push_back(predict_multiresolution(s1, subject));
    const std::span<const BandwidthSet> bw =
        model.mode == Mode::SL ? std::span<const BandwidthSet>(model.bandwidths) : std::span<const BandwidthSet>{};
    if (model.mode == Mode::SL && bw.size() != model.stage_one.size())
      throw Error("predict_superlearner: SL model lacks bandwidths");
    const Eigen::MatrixXd x = stage_one_covariates(raw, subject.coords, bw, model.target, model.stage_one_output);
    out.proba = model.stage_two->predict_proba(x);
  }
  out.category.resize(subject.size());
  for (Eigen::Index j = 0; j < out.proba.rows(); ++j)
    out.category[static_cast<std::size_t>(j)] = argmax_row(out.proba, j) + (model.target == Target::Binary ? 0 : 1);
  return out;
}

nlohmann::json stage_two_report(const SuperLearnerModel& model) {
  nlohmann::json j;
  j["mode"] = to_string(model.mode);
  if (!model.stage_two) return j;
  auto params = [&](const FittedLearner& f) {
    nlohmann::json p;
    std::visit(
        [&](const auto& q) {
          using T = std::decay_t<decltype(q)>;
          if constexpr (std::is_same_v<T, ProbitParams>) {
            p["intercept"] = q.intercept;
            p["coef"] = std::vector<double>(q.coef.data(), q.coef.data() + q.coef.size());
          } else if constexpr (std::is_same_v<T, OrderedProbitParams>) {
            p["coef"] = std::vector<double>(q.coef.data(), q.coef.data() + q.coef.size());
            p["cutpoints"] = q.cutpoints;
          } else if constexpr (std::is_same_v<T, ConstantParams>) {
            p["constant"] = q.proba;
          }
        },
        f.params());
    return p;
  };
  j["columns"] = model.columns;
  if (model.target == Target::Ordinal) j["weights"] = to_string(model.scheme);
  j["pooled"] = params(*model.stage_two);
  j["per_fold"] = nlohmann::json::array();
  for (const auto& f : model.fold_stage_two) j["per_fold"].push_back(params(f));
  if (!model.bandwidths.empty()) {
    j["bandwidths"] = nlohmann::json::array();
    for (const auto& b : model.bandwidths) j["bandwidths"].push_back(b.h);
  }
  return j;
}

std::string format_stage_two_report(const SuperLearnerModel& model) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  if (!model.stage_two) {
    os << "Baseline: no stage two\n";
    return os.str();
  }
  const nlohmann::json r = stage_two_report(model);
  os << "stage two (" << to_string(model.mode);
  if (model.target == Target::Ordinal) os << " + " << to_string(model.scheme);
  os << ")\n";
  const auto& pooled = r["pooled"];
  if (pooled.contains("intercept")) os << "  intercept " << pooled["intercept"].get<double>() << '\n';
  if (pooled.contains("coef")) {
    os << "  " << std::left << std::setw(24) << "column" << std::right << std::setw(10) << "pooled";
    int v = 1;
    for (const auto& f : r["per_fold"])
      if (f.contains("coef")) os << std::setw(10) << ("fold" + std::to_string(v++));
    os << '\n';
    const auto coef = pooled["coef"].get<std::vector<double>>();
    for (std::size_t c = 0; c < coef.size(); ++c) {
      os << "  " << std::left << std::setw(24) << model.columns.at(c) << std::right << std::setw(10) << coef[c];
      for (const auto& f : r["per_fold"])
        if (f.contains("coef")) os << std::setw(10) << f["coef"][c].get<double>();
      os << '\n';
    }
  }
  if (pooled.contains("cutpoints")) {
    os << "  cutpoints";
    for (double a : pooled["cutpoints"].get<std::vector<double>>()) os << ' ' << a;
    os << '\n';
  }
  if (r.contains("bandwidths")) {
    std::size_t s = 0;
    for (const auto& b : r["bandwidths"]) {
      os << "  bandwidths[" << s++ << "]";
      int k = 1;
      for (double h : b.get<std::vector<double>>()) os << " k=" << k++ << ":" << h;
      os << '\n';
    }
  }
  return os.str();
}

nlohmann::json superlearner_to_json(const SuperLearnerModel& m) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["mode"] = to_string(m.mode);
  j["target"] = to_string(m.target);
  j["num_levels"] = m.num_levels;
  j["max_resolution"] = m.max_resolution;
  j["weights"] = to_string(m.scheme);
  j["stage_one_output"] = to_string(m.stage_one_output);
  j["columns"] = m.columns;
  j["folds"] = folds_to_json(m.folds);
  auto& s1 = j["stage_one"] = nlohmann::json::array();
  for (const auto& s : m.stage_one) s1.push_back(multires_to_json(s));
  auto& bw = j["bandwidths"] = nlohmann::json::array();
  for (const auto& b : m.bandwidths) bw.push_back(bandwidths_to_json(b));
  j["stage_two"] = m.stage_two ? learner_to_json(*m.stage_two) : nlohmann::json(nullptr);
  auto& per = j["fold_stage_two"] = nlohmann::json::array();
  for (const auto& f : m.fold_stage_two) per.push_back(learner_to_json(f));
  return j;
}

SuperLearnerModel superlearner_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<int>() != kModelFormat) throw SchemaError("unsupported model format");
    SuperLearnerModel m;
    m.mode = mode_from_string(j.at("mode").get<std::string>());
    m.target = target_from_string(j.at("target").get<std::string>());
    m.num_levels = j.at("num_levels").get<int>();
    m.max_resolution = j.at("max_resolution").get<int>();
    m.scheme = weight_scheme_from_string(j.at("weights").get<std::string>());
    m.stage_one_output = stage_one_output_from_string(j.at("stage_one_output").get<std::string>());
    m.columns = j.at("columns").get<std::vector<std::string>>();
    m.folds = folds_from_json(j.at("folds"));
    for (const auto& s : j.at("stage_one")) m.stage_one.push_back(multires_from_json(s));
    for (const auto& b : j.at("bandwidths")) m.bandwidths.push_back(bandwidths_from_json(b));
    if (!j.at("stage_two").is_null()) m.stage_two = learner_from_json(j["stage_two"]);
    for (const auto& f : j.at("fold_stage_two")) m.fold_stage_two.push_back(learner_from_json(f));
    if (m.mode != Mode::Baseline && !m.stage_two) throw SchemaError("stacked model without stage two");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed super learner model: ") + e.what());
  }
}

}  // namespace mrsl
