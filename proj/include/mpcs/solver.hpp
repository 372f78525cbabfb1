#pragma once

#include <optional>
#include <vector>

#include "mpcs/cost.hpp"
#include "mpcs/dynamics.hpp"
#include "mpcs/types.hpp"

namespace mpcs {

enum class SolveStatus { Optimal, Infeasible, MaxIter };

/// Solution of the finite-horizon problem: N controls, the predicted states
/// x*(k+1|k)..x*(k+N|k), and the modified value J*.
struct HorizonSolution {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<Vec> u_star;
  std::vector<Vec> x_star;
  double j_star = 0.0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Value of the one-step auxiliary problem m(x) = min_u l(f(x,u), u) subject
/// to u in U and f(x,u) in X.
struct OneStepValue {
  bool feasible = false;
  double m_val = 0.0;
  Vec u_star;
  Vec x_next;
};

/// One-step linear-quadratic gain and value matrix:
///   u*(x) = K x,  m(x) = x' M x,
///   K = -(R + B'QB)^+ B'QA,  M = A'QA - A'QB (R + B'QB)^+ B'QA.
/// A singular R + B'QB (deadbeat directions) falls back to the pseudoinverse;
/// `rank` reports the effective rank used.
struct LqGainValue {
  Mat K;
  Mat M;
  int rank = 0;
};

struct SolveOptions {
  bool force_numeric = false;  // bypass exact LQ fast paths (cross-validation)
  double stat_tol = 1e-8;      // projected-gradient stopping tolerance
  int max_iters = 10000;
};

/// Hook carrying the MPCS second-stage constraint
///   l(x(k+2|k), u(k+1|k)) <= bound
/// into the horizon solve. Requires N >= 2.
struct ExtraConstraint {
  double bound = 0.0;
};

/// Solve the N-horizon problem with the shifted stage cost. Unconstrained
/// linear-quadratic instances are solved exactly by backward recursion; all
/// other instances go through a condensed projected-gradient solve with an
/// augmented-Lagrangian treatment of state-set and extra constraints.
HorizonSolution solve_horizon(const SystemModel& model, const StageCost& l,
                              const ConstraintSets& sets, const Vec& x0, int N,
                              const std::optional<ExtraConstraint>& extra = std::nullopt,
                              const std::optional<TerminalWeight>& lt = std::nullopt,
                              const SolveOptions& opts = {});

/// The one-step auxiliary value m(x). Exact for linear-quadratic instances
/// with scalar input (interval clamp) and for unconstrained instances.
OneStepValue one_step_value(const SystemModel& model, const StageCost& l,
                            const ConstraintSets& sets, const Vec& x,
                            const SolveOptions& opts = {});

/// One-step minimization of x_next' Qw x_next + u' Rw u for arbitrary PSD
/// weights (Qw may be singular, unlike StageCost). Used for the tail control
/// of the terminal-weighted certificate.
OneStepValue one_step_value_weighted(const SystemModel& model, const Mat& Qw,
                                     const Mat& Rw, const ConstraintSets& sets,
                                     const Vec& x, const SolveOptions& opts = {});

LqGainValue lq_gain_and_value(const Mat& A, const Mat& B, const Mat& Q, const Mat& R);

/// Exact stagewise solution of the unconstrained LQ horizon problem by
/// backward recursion with zero terminal weight (or the given terminal P).
HorizonSolution solve_lq_horizon(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                                 const Vec& x0, int N,
                                 const std::optional<Mat>& terminal_P = std::nullopt);

/// Joint two-variable problem used by MPCS with N = 1:
///   min_{u0, u_tail} l(x1, u0)  s.t.  l(x2, u_tail) <= bound,
///   x1 = f(x0, u0), x2 = f(x1, u_tail), both in X, controls in U.
struct BoundedTailSolution {
  SolveStatus status = SolveStatus::Infeasible;
  Vec u0, u_tail, x1, x2;
  double j_star = 0.0;     // l(x1, u0)
  double tail_cost = 0.0;  // l(x2, u_tail)
};

BoundedTailSolution solve_one_stage_bounded_tail(const SystemModel& model,
                                                 const StageCost& l,
                                                 const ConstraintSets& sets, const Vec& x0,
                                                 double bound, const SolveOptions& opts = {});

/// Exhaustive-search oracle over a discretized control-sequence space with
/// lossless cost pruning. `polish` refines the best grid leaf by pattern
/// search so the reported value is within ~1e-10 of the local continuum
/// optimum it brackets. Self-contained on purpose: shares no code path with
/// solve_horizon.
struct GridSpec {
  Vec u_lo, u_hi;     // per input axis
  int points = 2001;  // samples per axis
  bool polish = true;
  long long node_budget = 200000000;
};

HorizonSolution brute_force_dp(const SystemModel& model, const StageCost& l,
                               const ConstraintSets& sets, const Vec& x0, int N,
                               const GridSpec& grid);

namespace detail {
/// Plain condensed horizon objective and the solver's adjoint gradient at the
/// stacked control vector z, without constraint terms. Exposed so derivative
/// tests can exercise the production gradient path directly.
double condensed_objective(const SystemModel& model, const StageCost& l, const Vec& x0,
                           int N, const Vec& z);
Vec condensed_gradient(const SystemModel& model, const StageCost& l, const Vec& x0, int N,
                       const Vec& z);
}  // namespace detail

}  // namespace mpcs
