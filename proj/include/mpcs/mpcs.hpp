#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpcs/trace.hpp"

namespace mpcs {

/// Node-centered grid over a state box, used by the invariant-set machinery.
/// `cells` nodes per axis (odd counts place a node exactly at the origin);
/// `control_samples` samples per control axis.
struct StateGrid {
  Vec lo, hi;
  int cells = 201;
  int control_samples = 401;
};

enum class RfMode { SecondStageConstraint, InvariantSet };

struct MpcsConfig {
  int N = 1;
  double delta = 0.0;  // strictness margin; 0 gives plain stability
  RfMode rf_mode = RfMode::SecondStageConstraint;
  StateGrid grid;  // used by RfMode::InvariantSet
};

struct MpcsStepRecord {
  int k = 0;
  bool feasible = false;
  double alpha = 0.0;  // m(x(k))
  HorizonSolution sol;
  Vec applied_u;
  Vec tail_u;                   // u(k+1|k) witness behind the constraint
  double constraint_lhs = 0.0;  // l(x(k+2|k), u(k+1|k))
};

/// Grid fixed point of the backward-reachability iteration: every member
/// node has m(x) <= alpha and some sampled control whose successor stays in
/// the set. An under-approximation by construction.
struct FeasibleSet {
  StateGrid grid;
  int n = 1;
  double alpha = 0.0;
  std::vector<std::uint8_t> member;  // row-major, axis 0 slow
  std::vector<double> m_cell;        // gridded one-step value per node

  int member_count() const;
  int snap_index(const Vec& x) const;       // nearest node, -1 outside the grid
  bool contains_point(const Vec& x) const;  // snap-to-node membership
  Vec node_center(int flat_index) const;
  std::string to_csv() const;  // node coordinates + membership flag
};

/// One MPCS step: compute alpha(k) = m(x), then solve the horizon problem
/// with the stability constraint l(x(k+2|k), u(k+1|k)) <= max(alpha - delta, 0).
/// For N = 1 the decision variables are (u(k|k), u(k+1|k)), the tail control
/// appearing only in the constraint.
MpcsStepRecord mpcs_step(const SystemModel& model, const StageCost& l,
                         const ConstraintSets& sets, const MpcsConfig& cfg, const Vec& x);

/// Cross-check path for N = 1: the nested reduction m(x(k+1)) <= bound solved
/// by scanning the first control and evaluating the inner one-step value.
/// Scalar input only.
MpcsStepRecord mpcs_step_nested(const SystemModel& model, const StageCost& l,
                                const ConstraintSets& sets, const MpcsConfig& cfg,
                                const Vec& x);

/// Closed-loop MPCS run; halts early with an infeasible classification when
/// a step cannot be certified.
ClosedLoopTrace run_mpcs(const SystemModel& model, const StageCost& l,
                         const ConstraintSets& sets, const MpcsConfig& cfg, const Vec& x0,
                         int steps);

/// Largest grid fixed point at level alpha. n <= 2, scalar input.
FeasibleSet compute_feasible_set(const SystemModel& model, const StageCost& l,
                                 const ConstraintSets& sets, double alpha,
                                 const StateGrid& grid);

/// Gridded one-step value at the node nearest to x: the minimum sampled
/// stage cost over the control grid with an X-feasible successor. +inf when
/// x falls outside the grid or no sample is feasible. The invariant-set
/// machinery quantizes its levels with this value so a start sitting exactly
/// on its own level line still seeds its node.
double gridded_one_step(const SystemModel& model, const StageCost& l,
                        const ConstraintSets& sets, const StateGrid& grid, const Vec& x);

/// One removal sweep; returns the number of nodes removed. Exposed so the
/// fixed-point property (a converged set loses nothing) stays testable.
int refine_sweep(FeasibleSet& fs, const SystemModel& model, const StageCost& l,
                 const ConstraintSets& sets);

/// Fixed point at a lower level alpha, seeded from an existing set. Levels
/// are monotone (alpha' <= alpha implies the set shrinks), so seeding from
/// `fs` intersected with {m <= alpha'} reaches the same fixed point as a
/// fresh computation.
FeasibleSet restrict_to_level(const FeasibleSet& fs, const SystemModel& model,
                              const StageCost& l, const ConstraintSets& sets,
                              double alpha);

/// MPCS step in recursive-feasibility mode: the second-stage constraint is
/// replaced by membership of the first predicted state in the control
/// invariant set at the current level, x(k+1|k) in X_f(alpha(k)).
MpcsStepRecord mpcs_step_rf(const SystemModel& model, const StageCost& l,
                            const ConstraintSets& sets, const MpcsConfig& cfg, const Vec& x,
                            const FeasibleSet& fs);

}  // namespace mpcs
