#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ipinn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Invalid user-supplied configuration (bad dims, bad enum, bad file).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse by calling code (contract violation).
struct UsageError : std::logic_error {
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Numerical failure at runtime (singular system, divergence, singularity).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ipinn
