#pragma once

#include <Eigen/Core>
#include <span>
#include <string_view>

#include "mrsl/learners.hpp"

namespace mrsl::detail {

/// Computes the Cholesky factor and log-determinant of k.cov. Throws FitError
/// when the covariance is not positive definite.
QdaClass finalize_qda_class(QdaClass k);

/// Shape, finiteness and label-range checks shared by every fit_* entry point.
void check_training_input(std::string_view who, const Eigen::MatrixXd& features,
                          std::span<const int> labels, int num_classes);

}  // namespace mrsl::detail
