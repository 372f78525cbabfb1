#pragma once

#include <string>

#include "mpcs/solver.hpp"

namespace mpcs {

enum class CertKind { Thm1, Thm2, ThmTw, Classic, LqN1 };

std::string to_string(CertKind kind);

/// One evaluated stability condition: the two sides, their margin
/// (margin = rhs - lhs) and the verdict margin >= -tau_cert. When the
/// one-step subproblem behind a side is infeasible the certificate carries
/// `infeasible` and a sentinel margin of -DBL_MAX.
struct Certificate {
  CertKind kind = CertKind::Thm1;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool verdict = false;
  bool infeasible = false;
  int k = -1;  // step index when attached to a closed-loop trace
  Vec state;   // context snapshot

  /// kind,k,lhs,rhs,margin,verdict
  std::string csv_row() const;
};

/// Stability of MPC without terminal weight: with the optimal solution at
/// hand, compare the best one-step cost available after the terminal state
/// against the first stage cost,
///   m(x*(k+N|k)) <= l(x*(k+1|k), u*(k|k)).
/// A true verdict certifies recursive feasibility and stability at this step.
Certificate check_thm1(const HorizonSolution& sol, const SystemModel& model,
                       const StageCost& l, const ConstraintSets& sets);

/// Terminal-set form: m(x*(k+N|k)) <= m(x(k)), i.e. the terminal state lies
/// in the sublevel set X_T with alpha = m(x(k)).
Certificate check_thm2(const Vec& x_now, const HorizonSolution& sol,
                       const SystemModel& model, const StageCost& l,
                       const ConstraintSets& sets);

/// Terminal-weighted condition: with the tail control chosen by minimizing
/// l_T(f(x*_N, u), u) over the input box,
///   l(x*_N, u*_{N-1}) - l(x*_1, u*_0)
///     + l_T(x_{N+1}, u_N) - l_T(x*_N, u*_{N-1}) <= 0.
/// The solution must come from the terminal-weighted objective. N = 1 is
/// rejected: the condition's indices collide there.
Certificate check_thm_tw(const HorizonSolution& sol_tw, const SystemModel& model,
                         const StageCost& l, const TerminalWeight& lt,
                         const ConstraintSets& sets);

/// Classic descent condition, evaluated pointwise at (x_terminal, u_terminal):
///   p(f(x,u)) - p(x) + l'(x,u) <= 0
/// where l' is the original (unshifted) stage cost evaluated at the current
/// state.
Certificate check_classic(const SystemModel& model, const StageCost& l_orig,
                          const TerminalWeight& p, const ConstraintSets& sets,
                          const Vec& x_terminal, const Vec& u_terminal);

/// First-order closed-form region for x(k+1) = a x + b u with one-step cost
/// q x(k+1)^2 + r u^2. The closed loop is x(k+1) = pole * x(k) with
/// pole = a r / (r + b^2 q); the new condition is |pole| < 1 (necessary and
/// sufficient), the prior one a^2 r / (r + b^2 q) < 1.
struct FirstOrderRegion {
  bool new_condition = false;
  bool prior_condition = false;
  double closed_loop_pole = 0.0;
};

FirstOrderRegion first_order_region(double a, double b, double q, double r);

/// Global N = 1 certificate for the R = 0 linear-quadratic case: verdict true
/// iff x'(A+BK)'M(A+BK)x <= x'Mx for all x in range(M), decided by an
/// eigenvalue test on the restricted pencil.
Certificate lq_n1_certificate(const Mat& A, const Mat& B, const Mat& Q);

}  // namespace mpcs
