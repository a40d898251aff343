#pragma once

#include <Eigen/Dense>

namespace slowfast {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace slowfast
