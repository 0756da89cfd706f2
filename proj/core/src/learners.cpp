#include "mrsl/learners.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>

#include "mrsl/error.hpp"
#include "mrsl/log.hpp"
#include "mrsl/normal.hpp"
#include "detail.hpp"

namespace mrsl {

namespace {

std::mutex g_sink_mutex;
MessageSink g_sink;
std::atomic<std::size_t> g_warnings{0};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("shape").at(0).get<Eigen::Index>();
  const auto cols = j.at("shape").at(1).get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw SchemaError("matrix data length does not match declared shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void set_warning_sink(MessageSink sink) {
  std::lock_guard lock(g_sink_mutex);
  g_sink = std::move(sink);
}

void warn(std::string_view message) {
  g_warnings.fetch_add(1, std::memory_order_relaxed);
  std::lock_guard lock(g_sink_mutex);
  if (g_sink) g_sink(message);
}

std::size_t warning_count() noexcept { return g_warnings.load(std::memory_order_relaxed); }

std::string_view to_string(LearnerKind kind) noexcept {
  switch (kind) {
    case LearnerKind::ProbitGLM: return "probit";
    case LearnerKind::QDA: return "qda";
    case LearnerKind::RandomForest: return "rf";
    case LearnerKind::OrderedProbit: return "ordered_probit";
  }
  return "unknown";
}

LearnerKind learner_kind_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "probit" || lower == "glm") return LearnerKind::ProbitGLM;
  if (lower == "qda") return LearnerKind::QDA;
  if (lower == "rf" || lower == "random_forest" || lower == "randomforest")
    return LearnerKind::RandomForest;
  if (lower == "ordered_probit" || lower == "oprobit") return LearnerKind::OrderedProbit;
  throw ConfigError("learner", "unknown learner '" + std::string(name) + "'");
}

void validate(const LearnerSpec& spec) {
  if (!(spec.ridge >= 0.0) || !std::isfinite(spec.ridge))
    throw ConfigError("learner.ridge", "must be finite and >= 0");
  if (spec.trees < 1) throw ConfigError("learner.trees", "must be >= 1");
  if (spec.features_per_split < 0) throw ConfigError("learner.features_per_split", "must be >= 0");
  if (spec.leaf_min < 1) throw ConfigError("learner.leaf_min", "must be >= 1");
  if (!std::isfinite(spec.jitter)) throw ConfigError("learner.jitter", "must be finite");
}

int DecisionTree::predict(const double* row) const noexcept {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].label;
}

FittedLearner::FittedLearner(LearnerSpec spec, int num_classes, int dim, Params params)
    : spec_(spec), num_classes_(num_classes), dim_(dim), params_(std::move(params)) {}

std::optional<int> FittedLearner::constant_class() const noexcept {
  if (const auto* c = std::get_if<ConstantParams>(&params_)) return c->constant_class;
  return std::nullopt;
}

std::vector<double> FittedLearner::predict_proba(std::span<const double> y) const {
  if (static_cast<int>(y.size()) != dim_)
    throw DimensionError("predict_proba: expected " + std::to_string(dim_) +
                         " features, got " + std::to_string(y.size()));
  std::vector<double> out(static_cast<std::size_t>(num_classes_));
  predict_row(y.data(), out.data());
  return out;
}

Eigen::MatrixXd FittedLearner::predict_proba(const Eigen::MatrixXd& features) const {
  if (features.cols() != dim_)
    throw DimensionError("predict_proba: expected " + std::to_string(dim_) +
                         " feature columns, got " + std::to_string(features.cols()));
  const Eigen::Index n = features.rows();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(n, num_classes_);
  std::vector<double> row(static_cast<std::size_t>(dim_));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int f = 0; f < dim_; ++f) row[static_cast<std::size_t>(f)] = features(i, f);
    predict_row(row.data(), out.row(i).data());
  }
  return out;
}

void FittedLearner::predict_row(const double* y, double* out) const {
  const int z = num_classes_;
  std::visit(
      Overloaded{
          [&](const ConstantParams& p) { std::copy(p.proba.begin(), p.proba.end(), out); },
          [&](const ProbitParams& p) {
            double eta = p.intercept;
            for (int f = 0; f < dim_; ++f) eta += p.coef[f] * y[f];
            const double prob = normal_cdf(eta);
            out[0] = 1.0 - prob;
            out[1] = prob;
          },
          [&](const OrderedProbitParams& p) {
            double eta = 0.0;
            for (int f = 0; f < dim_; ++f) eta += p.coef[f] * y[f];
            double total = 0.0;
            constexpr double inf = std::numeric_limits<double>::infinity();
            for (int c = 0; c < z; ++c) {
              const double lo = c == 0 ? -inf : p.cutpoints[static_cast<std::size_t>(c - 1)] - eta;
              const double hi = c == z - 1 ? inf : p.cutpoints[static_cast<std::size_t>(c)] - eta;
              out[c] = std::exp(log_normal_interval(lo, hi));
              total += out[c];
            }
            for (int c = 0; c < z; ++c) out[c] /= total;
          },
          [&](const QdaParams& p) {
            const Eigen::Map<const Eigen::VectorXd> yv(y, dim_);
            double best = -std::numeric_limits<double>::infinity();
            std::vector<double> logp(static_cast<std::size_t>(z),
                                     -std::numeric_limits<double>::infinity());
            for (int c = 0; c < z; ++c) {
              const QdaClass& k = p.classes[static_cast<std::size_t>(c)];
              if (k.prior <= 0.0) continue;
              const Eigen::VectorXd r = k.chol_lower.triangularView<Eigen::Lower>().solve(yv - k.mean);
              logp[static_cast<std::size_t>(c)] = std::log(k.prior) - 0.5 * k.log_det - 0.5 * r.squaredNorm();
              best = std::max(best, logp[static_cast<std::size_t>(c)]);
            }
            double total = 0.0;
            for (int c = 0; c < z; ++c) {
              out[c] = std::exp(logp[static_cast<std::size_t>(c)] - best);
              total += out[c];
            }
            for (int c = 0; c < z; ++c) out[c] /= total;
          },
          [&](const ForestParams& p) {
            std::fill(out, out + z, 0.0);
            for (const auto& tree : p.trees) out[tree.predict(y)] += 1.0;
            const double t = static_cast<double>(p.trees.size());
            for (int c = 0; c < z; ++c) out[c] /= t;
          },
      },
      params_);
}

FittedLearner make_constant_learner(const LearnerSpec& spec, int dim, std::vector<double> proba) {
  const int z = static_cast<int>(proba.size());
  double total = 0.0;
  for (double p : proba) {
    if (!(p >= 0.0)) throw Error("constant learner: negative probability");
    total += p;
  }
  if (!(total > 0.0)) throw Error("constant learner: probabilities sum to zero");
  for (double& p : proba) p /= total;
  std::optional<int> cls;
  for (int c = 0; c < z; ++c)
    if (proba[static_cast<std::size_t>(c)] == 1.0) cls = c;
  return FittedLearner(spec, z, dim, ConstantParams{std::move(proba), cls});
}

FittedLearner make_constant_class_learner(const LearnerSpec& spec, int dim, int num_classes,
                                          int label) {
  std::vector<double> proba(static_cast<std::size_t>(num_classes), 0.0);
  proba.at(static_cast<std::size_t>(label)) = 1.0;
  return FittedLearner(spec, num_classes, dim, ConstantParams{std::move(proba), label});
}

FittedLearner fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                          std::span<const int> labels, int num_classes) {
  if (features.rows() == 0) throw FitError("fit_learner: empty training set");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw DimensionError("fit_learner: feature rows and labels differ in length");
  const int dim = static_cast<int>(features.cols());
  const int first = labels[0];
  if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == first; }))
    return make_constant_class_learner(spec, dim, num_classes, first);
  FittedLearner fitted;
  switch (spec.kind) {
    case LearnerKind::ProbitGLM:
      // With more than two ordered classes the GLM is the ordered probit.
      fitted = num_classes == 2 ? fit_probit(features, labels, spec.ridge)
                                : fit_ordered_probit(features, labels, num_classes, {}, spec.ridge);
      break;
    case LearnerKind::QDA:
      fitted = fit_qda(features, labels, num_classes, spec.jitter);
      break;
    case LearnerKind::RandomForest:
      fitted = fit_random_forest(features, labels, num_classes,
                                 {spec.trees, spec.features_per_split, spec.leaf_min, spec.seed});
      break;
    case LearnerKind::OrderedProbit:
      fitted = fit_ordered_probit(features, labels, num_classes, {}, spec.ridge);
      break;
  }
  return FittedLearner(spec, fitted.num_classes(), fitted.dim(), fitted.params());
}

nlohmann::json spec_to_json(const LearnerSpec& spec) {
  return {{"kind", to_string(spec.kind)},
          {"ridge", spec.ridge},
          {"trees", spec.trees},
          {"features_per_split", spec.features_per_split},
          {"leaf_min", spec.leaf_min},
          {"jitter", spec.jitter},
          {"seed", spec.seed}};
}

LearnerSpec spec_from_json(const nlohmann::json& j) {
  LearnerSpec s;
  s.kind = learner_kind_from_string(j.at("kind").get<std::string>());
  s.ridge = j.value("ridge", s.ridge);
  s.trees = j.value("trees", s.trees);
  s.features_per_split = j.value("features_per_split", s.features_per_split);
  s.leaf_min = j.value("leaf_min", s.leaf_min);
  s.jitter = j.value("jitter", s.jitter);
  s.seed = j.value("seed", s.seed);
  validate(s);
  return s;
}

nlohmann::json learner_to_json(const FittedLearner& model) {
  nlohmann::json j;
  j["spec"] = spec_to_json(model.spec());
  j["num_classes"] = model.num_classes();
  j["dim"] = model.dim();
  std::visit(
      Overloaded{
          [&](const ConstantParams& p) {
            j["type"] = "constant";
            j["proba"] = p.proba;
            j["constant_class"] = p.constant_class ? nlohmann::json(*p.constant_class) : nlohmann::json();
          },
          [&](const ProbitParams& p) {
            j["type"] = "probit";
            j["intercept"] = p.intercept;
            j["coef"] = to_std(p.coef);
          },
          [&](const OrderedProbitParams& p) {
            j["type"] = "ordered_probit";
            j["coef"] = to_std(p.coef);
            j["cutpoints"] = p.cutpoints;
          },
          [&](const QdaParams& p) {
            j["type"] = "qda";
            auto& classes = j["classes"] = nlohmann::json::array();
            for (const auto& k : p.classes)
              classes.push_back({{"prior", k.prior},
                                 {"mean", to_std(k.mean)},
                                 {"cov", matrix_to_json(k.cov)}});
          },
          [&](const ForestParams& p) {
            j["type"] = "random_forest";
            auto& trees = j["trees"] = nlohmann::json::array();
            for (const auto& t : p.trees) {
              auto nodes = nlohmann::json::array();
              for (const auto& n : t.nodes)
                nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
              trees.push_back(std::move(nodes));
            }
          },
      },
      model.params());
  return j;
}



FittedLearner learner_from_json(const nlohmann::json& j) {
  try {
    const LearnerSpec spec = spec_from_json(j.at("spec"));
    const int z = j.at("num_classes").get<int>();
    const int dim = j.at("dim").get<int>();
    const std::string type = j.at("type").get<std::string>();
    FittedLearner::Params params;
    if (type == "constant") {
      ConstantParams p;
      p.proba = j.at("proba").get<std::vector<double>>();
      if (!j.at("constant_class").is_null()) p.constant_class = j["constant_class"].get<int>();
      params = std::move(p);
    } else if (type == "probit") {
      params = ProbitParams{j.at("intercept").get<double>(), vector_from_json(j.at("coef"))};
    } else if (type == "ordered_probit") {
      params = OrderedProbitParams{vector_from_json(j.at("coef")),
                                   j.at("cutpoints").get<std::vector<double>>()};
    } else if (type == "qda") {
      QdaParams p;
      for (const auto& jc : j.at("classes")) {
        QdaClass k;
        k.prior = jc.at("prior").get<double>();
        k.mean = vector_from_json(jc.at("mean"));
        k.cov = matrix_from_json(jc.at("cov"));
        p.classes.push_back(k.prior > 0.0 ? detail::finalize_qda_class(std::move(k)) : std::move(k));
      }
      params = std::move(p);
    } else if (type == "random_forest") {
      ForestParams p;
      for (const auto& jt : j.at("trees")) {
        DecisionTree t;
        for (const auto& jn : jt)
          t.nodes.push_back({jn.at(0).get<int>(), jn.at(1).get<double>(), jn.at(2).get<int>(),
                             jn.at(3).get<int>(), jn.at(4).get<int>()});
        p.trees.push_back(std::move(t));
      }
      params = std::move(p);
    } else {
      throw SchemaError("unknown learner type '" + type + "'");
    }
    return FittedLearner(spec, z, dim, std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed learner document: ") + e.what());
  }
}

}  // namespace mrsl

namespace mrsl::detail {

void check_training_input(std::string_view who, const Eigen::MatrixXd& features,
                          std::span<const int> labels, int num_classes) {
  const std::string name(who);
  if (features.rows() < 1) throw FitError(name + ": empty training set");
  if (features.cols() < 1) throw DimensionError(name + ": no feature columns");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw DimensionError(name + ": feature rows and labels differ in length");
  if (!features.allFinite()) throw FitError(name + ": non-finite feature value");
  for (int l : labels)
    if (l < 0 || l >= num_classes)
      throw FitError(name + ": label " + std::to_string(l) + " outside 0.." +
                     std::to_string(num_classes - 1));
}

}  // namespace mrsl::detail
