#pragma once

#include <Eigen/Dense>

namespace pcmea {

/// Dense row-major matrix; one row per entity wherever rows index entities.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace pcmea
