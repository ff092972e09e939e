#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace repmetric {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<std::string>;

inline constexpr const char* kVersion = "0.1.0";

}  // namespace repmetric
