#pragma once

#include <string>
#include <vector>

#include "mpcs/mpcs.hpp"

namespace mpcs {

/// Receding-horizon controllers understood by the simulator.
struct Controller {
  enum class Kind { OpenLoop, StaticGain, Mpc, Mpcs };
  Kind kind = Kind::OpenLoop;
  Mat K;  // static gain
  int N = 1;
  std::optional<TerminalWeight> lt;
  MpcsConfig mpcs;

  static Controller open_loop();
  static Controller static_gain(Mat K);
  static Controller mpc(int N, std::optional<TerminalWeight> lt = std::nullopt);
  static Controller mpcs_controller(MpcsConfig cfg);
};

/// Optional read-only certificate monitors; simulation results never depend
/// on whether these run.
struct Monitors {
  bool thm1 = false;
  bool thm2 = false;
};

/// Closed loop x(k+1) = f(x(k), u*(k|k)): apply only the first control each
/// step, re-solve from the new state.
ClosedLoopTrace simulate(const SystemModel& model, const StageCost& l,
                         const ConstraintSets& sets, const Controller& controller,
                         const Vec& x0, int steps, const Monitors& monitors = {},
                         const ClassifyRules& rules = {});

struct RunSummary {
  std::string name;
  RunClass classification = RunClass::MaxSteps;
  int infeasible_k = -1;
  double final_norm = 0.0;
  int steps_to_converge = -1;
  bool alpha_monotone = true;   // alpha(k+1) <= alpha(k) + tau_cert where defined
  bool j_star_monotone = true;  // same for J*
};

/// Per-trace summary table; all traces must share x0 (same scenario).
std::vector<RunSummary> compare_runs(const std::vector<std::string>& names,
                                     const std::vector<const ClosedLoopTrace*>& traces);

std::string summary_table(const std::vector<RunSummary>& rows);

}  // namespace mpcs
