#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mrsl {

/// Class labels passed to every learner are 0-based class indices: the binary
/// cancer label c directly, or G - 1 for ordinal grades.

enum class LearnerKind { ProbitGLM, QDA, RandomForest, OrderedProbit };

std::string_view to_string(LearnerKind kind) noexcept;
LearnerKind learner_kind_from_string(std::string_view name);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::ProbitGLM;
  double ridge = 1e-4;          // probit and ordered probit
  int trees = 100;              // random forest
  int features_per_split = 0;   // 0 selects ceil(sqrt(d))
  int leaf_min = 5;
  double jitter = -1.0;         // QDA; negative selects 1e-6 * mean covariance diagonal
  std::uint64_t seed = 0;

  friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

/// Validates hyperparameter ranges, throwing ConfigError.
void validate(const LearnerSpec& spec);

struct ProbitParams {
  double intercept = 0.0;
  Eigen::VectorXd coef;
};

struct QdaClass {
  double prior = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  // Derived from cov at fit/load time.
  Eigen::MatrixXd chol_lower;
  double log_det = 0.0;
};

struct QdaParams {
  std::vector<QdaClass> classes;  // prior 0 for classes absent from training
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;     // majority class at the node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  int predict(const double* row) const noexcept;
};

struct ForestParams {
  std::vector<DecisionTree> trees;
};

struct OrderedProbitParams {
  Eigen::VectorXd coef;
  std::vector<double> cutpoints;  // strictly increasing, Z - 1 entries
};

/// Single-class or empty-region fallback.
struct ConstantParams {
  std::vector<double> proba;
  std::optional<int> constant_class;
};

class FittedLearner {
 public:
  using Params =
      std::variant<ProbitParams, QdaParams, ForestParams, OrderedProbitParams, ConstantParams>;

  FittedLearner() = default;
  FittedLearner(LearnerSpec spec, int num_classes, int dim, Params params);

  const LearnerSpec& spec() const noexcept { return spec_; }
  int num_classes() const noexcept { return num_classes_; }
  int dim() const noexcept { return dim_; }
  const Params& params() const noexcept { return params_; }

  bool is_constant() const noexcept { return std::holds_alternative<ConstantParams>(params_); }
  std::optional<int> constant_class() const noexcept;

  /// Class-probability vector for one feature vector.
  std::vector<double> predict_proba(std::span<const double> y) const;
  /// Row-wise class probabilities for an n x d matrix; returns n x num_classes.
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& features) const;

 private:
  void predict_row(const double* row, double* out) const;

  LearnerSpec spec_;
  int num_classes_ = 2;
  int dim_ = 0;
  Params params_ = ConstantParams{};
};

FittedLearner make_constant_learner(const LearnerSpec& spec, int dim, std::vector<double> proba);
FittedLearner make_constant_class_learner(const LearnerSpec& spec, int dim, int num_classes,
                                          int label);

/// Ridge-penalized probit GLM with unpenalized intercept, fit by damped Newton.
/// Labels all one class yield a constant learner.
FittedLearner fit_probit(const Eigen::MatrixXd& features, std::span<const int> labels,
                         double ridge = 1e-4);

/// Phi(b0 + b'y) for a ProbitGLM (or a constant learner with two classes).
double predict_probit(const FittedLearner& model, std::span<const double> y);

/// Penalized probit log-likelihood sum(log Phi(q_i eta_i)) - ridge/2 |beta|^2.
double probit_objective(const Eigen::MatrixXd& features, std::span<const int> labels,
                        double intercept, const Eigen::VectorXd& coef, double ridge);

/// Quadratic discriminant analysis. Classes with fewer than d + 1 samples use
/// the pooled within-class covariance.
FittedLearner fit_qda(const Eigen::MatrixXd& features, std::span<const int> labels,
                      int num_classes, double jitter = -1.0);

struct ForestOptions {
  int trees = 100;
  int features_per_split = 0;
  int leaf_min = 5;
  std::uint64_t seed = 0;
};

/// CART forest with bootstrap resampling and Gini splits. Predicts the vote
/// share of each class.
FittedLearner fit_random_forest(const Eigen::MatrixXd& features, std::span<const int> labels,
                                int num_classes, const ForestOptions& options);

/// Weighted ordered probit: maximizes sum_i w_i log P(G_i | x_i) - ridge/2 |beta|^2.
/// Weights are rescaled to sum to n before fitting, so any constant weight
/// vector gives the unweighted fit. An empty `weights` span means w_i = 1.
FittedLearner fit_ordered_probit(const Eigen::MatrixXd& features, std::span<const int> labels,
                                 int num_classes, std::span<const double> weights = {},
                                 double ridge = 1e-4);

/// Ordered-probit negative penalized log-likelihood in the parameters
/// theta = (beta, a_1, ..., a_{Z-1}). The value is +inf unless the cutpoints
/// increase strictly. Labels are 0-based; weights are used as given.
class OrderedProbitObjective {
 public:
  OrderedProbitObjective(const Eigen::MatrixXd& features, std::span<const int> labels,
                         int num_classes, std::span<const double> weights, double ridge);

  Eigen::Index num_params() const noexcept { return dim_ + num_classes_ - 1; }
  double value(const Eigen::VectorXd& theta) const;
  double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;
  /// Also fills the Hessian of the objective.
  double value_gradient_hessian(const Eigen::VectorXd& theta, Eigen::VectorXd& grad,
                                Eigen::MatrixXd& hessian) const;

 private:
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::MatrixXd* hessian) const;

  const Eigen::MatrixXd& x_;
  std::vector<int> labels_;
  std::vector<double> weights_;
  int num_classes_;
  Eigen::Index dim_;
  double ridge_;
};

/// Dispatches on spec.kind. A training set whose labels are all one class
/// yields a constant learner for that class; an empty one is an error.
/// ProbitGLM with more than two classes fits the ordered probit.
FittedLearner fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& features,
                          std::span<const int> labels, int num_classes);

nlohmann::json learner_to_json(const FittedLearner& model);
FittedLearner learner_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const LearnerSpec& spec);
LearnerSpec spec_from_json(const nlohmann::json& doc);

}  // namespace mrsl
