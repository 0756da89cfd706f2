#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "detail.hpp"
#include "mrsl/error.hpp"
#include "mrsl/learners.hpp"
#include "mrsl/log.hpp"
#include "mrsl/normal.hpp"

namespace mrsl {

namespace {

constexpr int kMaxIterations = 100;
constexpr int kMaxHalvings = 30;
constexpr double kGradientTolerance = 1e-10;  // times the total weight
constexpr double kStallTolerance = 1e-5;       // accepted when the line search stalls
constexpr double kAbsentGap = 1e-9;          // width of an interior absent category
constexpr double kFarGap = 1e3;              // distance to cutpoints of absent end categories

}  // namespace

double OrderedProbitObjective::evaluate(const Eigen::VectorXd& par, Eigen::VectorXd* grad,
                                        Eigen::MatrixXd* info) const {
  const Eigen::MatrixXd& x = x_;
  const std::vector<int>& labels = labels_;
  const std::vector<double>& w = weights_;
  const int z = num_classes_;
  const double ridge = ridge_;
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Eigen::Index d = x.cols();
  const Eigen::Index p = num_params();
  if (par.size() != p) throw DimensionError("OrderedProbitObjective: parameter length mismatch");
  for (Eigen::Index c = 1; c < z - 1; ++c)
    if (!(par[d + c] > par[d + c - 1])) return inf;
  const Eigen::VectorXd beta = par.head(d);
  const Eigen::VectorXd eta = x * beta;
  const bool want = grad != nullptr;
  if (want) {
    grad->setZero(p);
    info->setZero(p, p);
  }
  double f = 0.0;
  Eigen::VectorXd u(p);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double wi = w[i];
    if (wi == 0.0) continue;
    const int c = labels[i];
    const auto ei = static_cast<Eigen::Index>(i);
    const double lo = c == 0 ? -inf : par[d + c - 1] - eta[ei];
    const double hi = c == z - 1 ? inf : par[d + c] - eta[ei];
    const double lp = log_normal_interval(lo, hi);
    if (!std::isfinite(lp)) return inf;
    f -= wi * lp;
    if (!want) continue;
    // g_lo = dl/dlo, g_hi = dl/dhi and the 2x2 Hessian of l in (lo, hi).
    const double rl = std::isfinite(lo) ? std::exp(log_normal_pdf(lo) - lp) : 0.0;
    const double rh = std::isfinite(hi) ? std::exp(log_normal_pdf(hi) - lp) : 0.0;
    const double gl = -rl, gh = rh;
    const double hll = (std::isfinite(lo) ? lo * rl : 0.0) - gl * gl;
    const double hhh = (std::isfinite(hi) ? -hi * rh : 0.0) - gh * gh;
    const double hlh = -gl * gh;
    // l depends on beta through -x_i in both lo and hi.
    const auto xi = x.row(ei).transpose();
    grad->head(d) -= (wi * -(gl + gh)) * xi;
    const double hee = hll + hhh + 2.0 * hlh;
    info->topLeftCorner(d, d).noalias() -= (wi * hee) * (xi * xi.transpose());
    if (c > 0) {
      const Eigen::Index k = d + c - 1;
      (*grad)[k] -= wi * gl;
      (*info)(k, k) -= wi * hll;
      info->col(k).head(d) -= (wi * -(hll + hlh)) * xi;
    }
    if (c < z - 1) {
      const Eigen::Index k = d + c;
      (*grad)[k] -= wi * gh;
      (*info)(k, k) -= wi * hhh;
      info->col(k).head(d) -= (wi * -(hhh + hlh)) * xi;
    }
    if (c > 0 && c < z - 1) {
      (*info)(d + c - 1, d + c) -= wi * hlh;
      (*info)(d + c, d + c - 1) -= wi * hlh;
    }
  }
  f += 0.5 * ridge * beta.squaredNorm();
  if (want) {
    grad->head(d) += ridge * beta;
    info->diagonal().head(d).array() += ridge;
    for (Eigen::Index k = d; k < p; ++k) info->row(k).head(d) = info->col(k).head(d).transpose();
  }
  return f;
}

OrderedProbitObjective::OrderedProbitObjective(const Eigen::MatrixXd& features,
                                               std::span<const int> labels, int num_classes,
                                               std::span<const double> weights, double ridge)
    : x_(features),
      labels_(labels.begin(), labels.end()),
      weights_(weights.begin(), weights.end()),
      num_classes_(num_classes),
      dim_(features.cols()),
      ridge_(ridge) {
  if (weights_.empty()) weights_.assign(labels_.size(), 1.0);
  if (weights_.size() != labels_.size()) throw DimensionError("OrderedProbitObjective: weights length mismatch");
}

double OrderedProbitObjective::value(const Eigen::VectorXd& theta) const {
  return evaluate(theta, nullptr, nullptr);
}

double OrderedProbitObjective::value_and_gradient(const Eigen::VectorXd& theta,
                                                  Eigen::VectorXd& grad) const {
  Eigen::MatrixXd unused;
  return evaluate(theta, &grad, &unused);
}

double OrderedProbitObjective::value_gradient_hessian(const Eigen::VectorXd& theta, Eigen::VectorXd& grad,
                                                      Eigen::MatrixXd& hessian) const {
  return evaluate(theta, &grad, &hessian);
}

FittedLearner fit_ordered_probit(const Eigen::MatrixXd& features, std::span<const int> labels,
                                 int num_classes, std::span<const double> weights, double ridge) {
  detail::check_training_input("fit_ordered_probit", features, labels, num_classes);
  if (num_classes < 2) throw ConfigError("num_classes", "ordered probit needs at least 2 levels");
  if (!(ridge >= 0.0)) throw ConfigError("ridge", "must be >= 0");
  const std::size_t n = labels.size();
  std::vector<double> w(n, 1.0);
  if (!weights.empty()) {
    if (weights.size() != n) throw DimensionError("fit_ordered_probit: weights length mismatch");
    double total = 0.0;
    for (double v : weights) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw FitError("fit_ordered_probit: weights must be finite and non-negative");
      total += v;
    }
    if (!(total > 0.0)) throw FitError("fit_ordered_probit: weights are all zero");
    const double scale = static_cast<double>(n) / total;
    for (std::size_t i = 0; i < n; ++i) w[i] = weights[i] * scale;
  }

  // Categories carrying positive weight; absent ones are fitted around.
  std::vector<double> class_weight(static_cast<std::size_t>(num_classes), 0.0);
  for (std::size_t i = 0; i < n; ++i) class_weight[static_cast<std::size_t>(labels[i])] += w[i];
  std::vector<int> present;
  std::vector<int> compress(static_cast<std::size_t>(num_classes), -1);
  for (int c = 0; c < num_classes; ++c) {
    if (class_weight[static_cast<std::size_t>(c)] > 0.0) {
      compress[static_cast<std::size_t>(c)] = static_cast<int>(present.size());
      present.push_back(c);
    }
  }
  if (present.size() < 2)
    throw FitError("fit_ordered_probit: at least two categories must carry weight");
  if (static_cast<int>(present.size()) < num_classes)
    warn("fit_ordered_probit: " + std::to_string(num_classes - static_cast<int>(present.size())) +
         " categor" + (num_classes - static_cast<int>(present.size()) == 1 ? "y" : "ies") +
         " absent from training; their intervals are degenerate");

  const int zp = static_cast<int>(present.size());
  std::vector<int> local(n);
  for (std::size_t i = 0; i < n; ++i) local[i] = compress[static_cast<std::size_t>(labels[i])];

  const Eigen::Index d = features.cols();
  OrderedProbitObjective objective(features, local, zp, w, ridge);

  // Start at beta = 0 with cutpoints at the weighted cumulative proportions,
  // the exact maximizer of the intercept-only model.
  const double total_weight = static_cast<double>(n);
  std::vector<double> start_cut(static_cast<std::size_t>(zp - 1));
  double cum = 0.0;
  for (int c = 0; c < zp - 1; ++c) {
    cum += class_weight[static_cast<std::size_t>(present[static_cast<std::size_t>(c)])];
    const double p = std::clamp(cum / total_weight, 1e-12, 1.0 - 1e-12);
    start_cut[static_cast<std::size_t>(c)] = normal_quantile(p);
  }
  for (std::size_t c = 1; c < start_cut.size(); ++c)
    start_cut[c] = std::max(start_cut[c], start_cut[c - 1] + 1e-8);
  const Eigen::Index p = d + zp - 1;
  Eigen::VectorXd par(p);
  par.head(d).setZero();
  for (int c = 0; c < zp - 1; ++c) par[d + c] = start_cut[static_cast<std::size_t>(c)];
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;
  double f = objective.value_gradient_hessian(par, grad, info);
  const double tol = kGradientTolerance * total_weight;
  bool converged = false;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    if (grad.cwiseAbs().maxCoeff() <= tol) {
      converged = true;
      break;
    }
    // The objective is convex (log-concave likelihood), so info is PSD.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd dir = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !dir.allFinite() || !(grad.dot(dir) < 0.0)) {
      const double bump = 1e-8 * std::max(1.0, info.diagonal().cwiseAbs().maxCoeff());
      dir = (info + bump * Eigen::MatrixXd::Identity(p, p)).ldlt().solve(-grad);
      if (!dir.allFinite() || !(grad.dot(dir) < 0.0)) dir = -grad / total_weight;
    }
    const double slope = grad.dot(dir);
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd next;
    double next_f = 0.0;
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      next = par + step * dir;
      next_f = objective.value(next);
      if (std::isfinite(next_f) && next_f <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      converged = grad.cwiseAbs().maxCoeff() <= kStallTolerance * total_weight;
      break;
    }
    par = next;
    f = objective.value_gradient_hessian(par, grad, info);
  }
  if (!converged && grad.cwiseAbs().maxCoeff() <= kStallTolerance * total_weight) converged = true;
  if (!converged)
    throw FitError("fit_ordered_probit: did not converge (max gradient " +
                   std::to_string(grad.cwiseAbs().maxCoeff() / total_weight) + " per unit weight)");
  std::vector<double> fitted_cut(par.data() + d, par.data() + p);
  std::vector<double> cut(static_cast<std::size_t>(num_classes - 1));
  // Boundary c separates categories c and c + 1 (0-based).
  for (int c = 0; c < num_classes - 1; ++c) {
    const auto below = static_cast<int>(
        std::count_if(present.begin(), present.end(), [&](int k) { return k <= c; }));
    if (below == 0) {
      cut[static_cast<std::size_t>(c)] = fitted_cut.front() - kFarGap * (present.front() - c);
    } else if (below == zp) {
      cut[static_cast<std::size_t>(c)] = fitted_cut.back() + kFarGap * (c - present.back() + 1);
    } else {
      const int lower = present[static_cast<std::size_t>(below - 1)];
      cut[static_cast<std::size_t>(c)] =
          fitted_cut[static_cast<std::size_t>(below - 1)] + kAbsentGap * (c - lower);
    }
  }
  LearnerSpec spec;
  spec.kind = LearnerKind::OrderedProbit;
  spec.ridge = ridge;
  return FittedLearner(spec, num_classes, static_cast<int>(d),
                       OrderedProbitParams{par.head(d), std::move(cut)});
}

}  // namespace mrsl
