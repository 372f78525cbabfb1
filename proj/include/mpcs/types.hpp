#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mpcs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Absolute tolerance for set membership; solvers return boundary-active
// iterates that must count as feasible.
inline constexpr double kSetTol = 1e-9;

// Absolute tolerance for certificate verdicts; two nested numeric solves
// accumulate error above unit roundoff.
inline constexpr double kCertTol = 1e-7;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mpcs
