#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mpcs/types.hpp"

namespace mpcs {

/// Shifted stage cost l(x_next, u): the cost term charged to the successor
/// state and the current input. Separable quadratic is the workhorse,
/// l(x_next, u) = x_next' Q x_next + u' R u with Q > 0 and R >= 0 (R = 0
/// allowed). Evaluable costs wrap an arbitrary nonnegative callable with
/// l(0, 0) = 0.
class StageCost {
 public:
  using CostFn = std::function<double(const Vec&, const Vec&)>;

  static StageCost quadratic(Mat Q, Mat R);
  static StageCost evaluable(int state_dim, int input_dim, CostFn fn);

  bool is_quadratic() const { return quadratic_; }
  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  const Mat& Q() const;
  const Mat& R() const;
  double min_state_eigenvalue() const { return q_min_eig_; }

  double operator()(const Vec& x_next, const Vec& u) const;

 private:
  StageCost() = default;
  bool quadratic_ = true;
  int n_ = 0, m_ = 0;
  Mat Q_, R_;
  double q_min_eig_ = 0.0;
  CostFn fn_;
};

/// Terminal weight p(x_N) >= 0 with p(0) = 0. The combined last-stage cost is
/// l_T(x_N, u_{N-1}) = p(x_N) + u_{N-1}' R u_{N-1}, reusing the stage cost's
/// control weight.
struct TerminalWeight {
  Mat P;  // symmetric PSD

  static TerminalWeight quadratic(Mat P);
  double operator()(const Vec& x) const;
};

/// Shifted stage cost l(x_next, u) and verification against the operands.
double stage(const StageCost& l, const Vec& x_next, const Vec& u);

/// Combined last-stage cost l_T(x_N, u_{N-1}) = p(x_N) + u' R u.
double terminal_stage(const StageCost& l, const TerminalWeight& lt, const Vec& x_N,
                      const Vec& u_last);

/// Convert the original separable cost l'(x, u) = x' Qw x + u' Rw u into the
/// shifted form. The horizon sums differ only by the constant q(x(k)) and the
/// final-input term r(u(k+N)), which is minimized at u(k+N) = 0, so both
/// objectives share the same argmin control sequence.
StageCost shift_from_original(const Mat& q_weight, const Mat& r_weight);

/// Sum of shifted stage costs over a predicted trajectory. With a terminal
/// weight the last stage uses l_T instead of l.
double horizon_cost(const StageCost& l, const std::vector<Vec>& x_pred,
                    const std::vector<Vec>& u_seq,
                    const std::optional<TerminalWeight>& lt = std::nullopt);

}  // namespace mpcs
