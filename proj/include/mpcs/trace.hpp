#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpcs/stability.hpp"

namespace mpcs {

enum class RunClass { Converged, Diverged, MaxSteps, InfeasibleAt };

std::string to_string(RunClass cls);

struct TraceStep {
  int k = 0;
  Vec x;  // state the controller saw
  Vec u;  // applied control
  std::optional<double> j_star;
  std::optional<double> alpha;
  std::optional<Certificate> thm1;
  std::optional<Certificate> thm2;
};

/// Thresholds for the closed-loop classification. Defaults: converged once
/// ||x|| < 1e-6 for 5 consecutive states; diverged when ||x|| > 1e6 or
/// exceeds 1e3 * ||x0||.
struct ClassifyRules {
  double converge_norm = 1e-6;
  int converge_consecutive = 5;
  double diverge_norm = 1e6;
  double diverge_factor = 1e3;
};

struct ClosedLoopTrace {
  std::vector<TraceStep> steps;
  Vec x_final;  // state after the last applied control
  RunClass classification = RunClass::MaxSteps;
  int infeasible_k = -1;  // valid for InfeasibleAt
  int converged_at = -1;  // first index of the convergence streak

  const Vec& x0() const { return steps.empty() ? x_final : steps.front().x; }

  /// k,x1..xn,u1..um,J_star,alpha,thm1_margin,thm2_margin,class
  /// Undefined quantities stay empty; class repeats the trace classification.
  std::string to_csv() const;
  std::string certificates_csv() const;
};

/// Streak/threshold bookkeeping shared by the simulators. Feed states in
/// order; `done` latches once a terminal classification is reached.
class Classifier {
 public:
  Classifier(const Vec& x0, const ClassifyRules& rules);
  void observe(const Vec& x, int k);
  bool done() const { return done_; }
  RunClass result() const { return class_; }
  int converged_at() const { return converged_at_; }

 private:
  ClassifyRules rules_;
  double x0_norm_;
  int streak_ = 0;
  bool done_ = false;
  RunClass class_ = RunClass::MaxSteps;
  int converged_at_ = -1;
};

}  // namespace mpcs
