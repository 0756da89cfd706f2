#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "mrsl/error.hpp"
#include "mrsl/learners.hpp"
#include "mrsl/normal.hpp"

namespace mrsl {

namespace {

constexpr int kMaxIterations = 100;
constexpr int kMaxHalvings = 30;
constexpr double kStepTolerance = 1e-8;
constexpr double kFallbackRidge = 1e-6;

struct SingularHessian {};

// Newton ascent on the penalized log-likelihood; theta = (intercept, coef).
Eigen::VectorXd newton_probit(const Eigen::MatrixXd& x, std::span<const int> labels,
                              double ridge) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = x;

  Eigen::VectorXd q(n);
  double ones = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    q[i] = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    ones += labels[static_cast<std::size_t>(i)];
  }

  auto objective = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd eta = design * theta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ll += log_normal_cdf(q[i] * eta[i]);
    return ll - 0.5 * ridge * theta.tail(d).squaredNorm();
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  theta[0] = normal_quantile(ones / static_cast<double>(n));
  double current = objective(theta);

  Eigen::VectorXd grad(d + 1);
  Eigen::VectorXd weight(n);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    const Eigen::VectorXd eta = design * theta;
    Eigen::VectorXd score(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = q[i] * eta[i];
      const double mills = std::exp(log_normal_pdf(t) - log_normal_cdf(t));
      score[i] = q[i] * mills;
      weight[i] = std::max(mills * (t + mills), 0.0);
    }
    grad = design.transpose() * score;
    grad.tail(d) -= ridge * theta.tail(d);
    Eigen::MatrixXd info = design.transpose() * weight.asDiagonal() * design;
    info.diagonal().tail(d).array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) throw SingularHessian{};
    const Eigen::VectorXd delta = llt.solve(grad);
    if (!delta.allFinite()) throw SingularHessian{};

    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      const Eigen::VectorXd candidate = theta + step * delta;
      const double value = objective(candidate);
      if (std::isfinite(value) && value >= current) {
        theta = candidate;
        current = value;
        accepted = true;
        break;
      }
    }
    if (!accepted || step * delta.cwiseAbs().maxCoeff() < kStepTolerance) break;
  }
  return theta;
}

}  // namespace

double probit_objective(const Eigen::MatrixXd& features, std::span<const int> labels,
                        double intercept, const Eigen::VectorXd& coef, double ridge) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double eta = intercept + features.row(i).dot(coef);
    const double q = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    ll += log_normal_cdf(q * eta);
  }
  return ll - 0.5 * ridge * coef.squaredNorm();
}

FittedLearner fit_probit(const Eigen::MatrixXd& features, std::span<const int> labels,
                         double ridge) {
  detail::check_training_input("fit_probit", features, labels, 2);
  if (!(ridge >= 0.0)) throw ConfigError("ridge", "must be >= 0");
  LearnerSpec spec;
  spec.kind = LearnerKind::ProbitGLM;
  spec.ridge = ridge;
  const int d = static_cast<int>(features.cols());
  const int first = labels[0];
  if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == first; }))
    return make_constant_class_learner(spec, d, 2, first);

  Eigen::VectorXd theta;
  try {
    theta = newton_probit(features, labels, ridge);
  } catch (const SingularHessian&) {
    if (ridge >= kFallbackRidge)
      throw FitError("fit_probit: singular Hessian at ridge " + std::to_string(ridge));
    try {
      theta = newton_probit(features, labels, kFallbackRidge);
    } catch (const SingularHessian&) {
      throw FitError("fit_probit: singular Hessian persists after raising ridge to 1e-6");
    }
  }
  return FittedLearner(spec, 2, d, ProbitParams{theta[0], theta.tail(d)});
}

double predict_probit(const FittedLearner& model, std::span<const double> y) {
  if (!std::holds_alternative<ProbitParams>(model.params()) &&
      !(model.is_constant() && model.num_classes() == 2))
    throw Error("predict_probit: model is not a binary probit");
  return model.predict_proba(y)[1];
}

}  // namespace mrsl
