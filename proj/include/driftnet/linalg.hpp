#pragma once

#include <Eigen/Dense>

namespace driftnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Time series storage: one row per time point, one column per coordinate.
using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace driftnet
