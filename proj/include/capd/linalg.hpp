#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace capd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Class labels are positive integers throughout.
using ClassId = std::int64_t;

}  // namespace capd
