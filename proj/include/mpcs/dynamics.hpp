#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "mpcs/types.hpp"

namespace mpcs {

/// Componentwise input box |u_i| <= u_max_i. An empty u_max means the whole
/// input space is admissible.
struct InputBox {
  Vec u_max;  // size 0 => unbounded

  static InputBox unbounded() { return InputBox{}; }
  static InputBox symmetric(Vec bounds);

  bool is_bounded() const { return u_max.size() > 0; }
  bool contains(const Vec& u, double tol = kSetTol) const;
  Vec clamp(const Vec& u) const;
};

/// State constraint set: either all of R^n or an axis-aligned box that must
/// contain the origin.
struct StateSet {
  enum class Kind { AllSpace, Box };
  Kind kind = Kind::AllSpace;
  Vec lo, hi;  // valid for Kind::Box

  static StateSet all_space() { return StateSet{}; }
  static StateSet box(Vec lo, Vec hi);

  bool contains(const Vec& x, double tol = kSetTol) const;
  // Signed violation, 0 when inside; used by penalty terms.
  double violation(const Vec& x) const;
};

/// Discrete-time plant x(k+1) = f(x(k), u(k)) with f(0,0) = 0.
/// Linear models carry exact (A, B); nonlinear ones an evaluable transition
/// map over a stated bounded domain box.
class SystemModel {
 public:
  using TransitionFn = std::function<Vec(const Vec&, const Vec&)>;

  static SystemModel linear(Mat A, Mat B);
  static SystemModel nonlinear(int state_dim, int input_dim, TransitionFn f,
                               StateSet state_domain, InputBox input_domain);

  bool is_linear() const { return linear_; }
  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  const Mat& A() const;
  const Mat& B() const;

  /// Pure one-step propagation f(x, u). No input-box check here; nonlinear
  /// models reject (x, u) outside their stated domain.
  Vec step(const Vec& x, const Vec& u) const;

 private:
  SystemModel() = default;
  bool linear_ = true;
  int n_ = 0, m_ = 0;
  Mat A_, B_;
  TransitionFn f_;
  StateSet x_domain_;
  InputBox u_domain_;
};

/// Constraint pair used throughout the solvers.
struct ConstraintSets {
  InputBox input;
  StateSet state;

  static ConstraintSets none() { return {InputBox::unbounded(), StateSet::all_space()}; }
};

}  // namespace mpcs
