#include <Eigen/Cholesky>
#include <cmath>

#include "detail.hpp"
#include "mrsl/error.hpp"
#include "mrsl/learners.hpp"

namespace mrsl {

namespace detail {

QdaClass finalize_qda_class(QdaClass k) {
  Eigen::LLT<Eigen::MatrixXd> llt(k.cov);
  if (llt.info() != Eigen::Success) throw FitError("qda: covariance is not positive definite");
  k.chol_lower = llt.matrixL();
  k.log_det = 2.0 * k.chol_lower.diagonal().array().log().sum();
  return k;
}

}  // namespace detail

namespace {

constexpr double kDefaultJitter = 1e-6;  // relative to the mean covariance diagonal
constexpr double kMaxJitter = 1e-3;

}  // namespace

FittedLearner fit_qda(const Eigen::MatrixXd& features, std::span<const int> labels,
                      int num_classes, double jitter) {
  detail::check_training_input("fit_qda", features, labels, num_classes);
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  LearnerSpec spec;
  spec.kind = LearnerKind::QDA;
  spec.jitter = jitter;

  std::vector<Eigen::Index> count(static_cast<std::size_t>(num_classes), 0);
  std::vector<Eigen::VectorXd> mean(static_cast<std::size_t>(num_classes), Eigen::VectorXd::Zero(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    ++count[c];
    mean[c] += features.row(i).transpose();
  }
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    if (count[k] > 0) {
      mean[k] /= static_cast<double>(count[k]);
      ++present;
    }
  }
  if (present < 2) {
    return make_constant_class_learner(spec, static_cast<int>(d), num_classes, labels[0]);
  }

  std::vector<Eigen::MatrixXd> scatter(static_cast<std::size_t>(num_classes),
                                       Eigen::MatrixXd::Zero(d, d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd r = features.row(i).transpose() - mean[c];
    scatter[c].noalias() += r * r.transpose();
  }
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : scatter) pooled += s;
  const Eigen::Index pooled_df = n - present;
  if (pooled_df > 0) {
    pooled /= static_cast<double>(pooled_df);
  } else {
    // Every class is a singleton: fall back to the total covariance.
    const Eigen::VectorXd mu = features.colwise().mean().transpose();
    pooled = (features.rowwise() - mu.transpose()).transpose() * (features.rowwise() - mu.transpose());
    pooled /= static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  }

  QdaParams params;
  params.classes.resize(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    QdaClass& cls = params.classes[k];
    cls.mean = mean[k];
    if (count[k] == 0) {
      cls.prior = 0.0;
      cls.cov = Eigen::MatrixXd::Identity(d, d);
      continue;
    }
    cls.prior = static_cast<double>(count[k]) / static_cast<double>(n);
    Eigen::MatrixXd cov = count[k] >= d + 1
                              ? Eigen::MatrixXd(scatter[k] / static_cast<double>(count[k] - 1))
                              : pooled;
    double scale = cov.diagonal().mean();
    if (!(scale > 0.0)) scale = 1.0;
    double eps = jitter >= 0.0 ? jitter : kDefaultJitter * scale;
    for (;;) {
      cls.cov = cov;
      cls.cov.diagonal().array() += eps;
      try {
        cls = detail::finalize_qda_class(std::move(cls));
        break;
      } catch (const FitError&) {
        eps = eps > 0.0 ? eps * 10.0 : kDefaultJitter * scale;
        if (eps > kMaxJitter * scale)
          throw FitError("fit_qda: covariance of class " + std::to_string(c) +
                         " not positive definite after jitter escalation to 1e-3");
      }
    }
  }
  return FittedLearner(spec, num_classes, static_cast<int>(d), std::move(params));
}

}  // namespace mrsl
