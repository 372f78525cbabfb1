#include "mpcs/sim.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace mpcs {

Controller Controller::open_loop() { return Controller{}; }

Controller Controller::static_gain(Mat K) {
  Controller c;
  c.kind = Kind::StaticGain;
  c.K = std::move(K);
  return c;
}

Controller Controller::mpc(int N, std::optional<TerminalWeight> lt) {
  Controller c;
  c.kind = Kind::Mpc;
  c.N = N;
  c.lt = std::move(lt);
  return c;
}

Controller Controller::mpcs_controller(MpcsConfig cfg) {
  Controller c;
  c.kind = Kind::Mpcs;
  c.mpcs = std::move(cfg);
  c.N = c.mpcs.N;
  return c;
}

ClosedLoopTrace simulate(const SystemModel& model, const StageCost& l,
                         const ConstraintSets& sets, const Controller& controller,
                         const Vec& x0, int steps, const Monitors& monitors,
                         const ClassifyRules& rules) {
  if (steps < 0) throw ArgumentError("steps must be nonnegative");
  if (!sets.state.contains(x0)) throw ArgumentError("x0 lies outside the state set");

  ClosedLoopTrace trace;
  Classifier cls(x0, rules);
  Vec x = x0;
  FeasibleSet fs;
  bool fs_ready = false;

  for (int k = 0; k < steps; ++k) {
    cls.observe(x, k);
    if (cls.done()) break;

    TraceStep step;
    step.k = k;
    step.x = x;

    switch (controller.kind) {
      case Controller::Kind::OpenLoop:
        step.u = Vec::Zero(model.input_dim());
        break;
      case Controller::Kind::StaticGain:
        step.u = sets.input.clamp(controller.K * x);
        break;
      case Controller::Kind::Mpc: {
        const HorizonSolution sol =
            solve_horizon(model, l, sets, x, controller.N, std::nullopt, controller.lt);
        if (sol.status == SolveStatus::Infeasible) {
          trace.classification = RunClass::InfeasibleAt;
          trace.infeasible_k = k;
          trace.x_final = x;
          return trace;
        }
        step.u = sol.u_star.front();
        step.j_star = sol.j_star;
        if (monitors.thm1) {
          Certificate c = check_thm1(sol, model, l, sets);
          c.k = k;
          step.thm1 = std::move(c);
        }
        if (monitors.thm2) {
          Certificate c = check_thm2(x, sol, model, l, sets);
          c.k = k;
          step.alpha = c.rhs;  // rhs of the terminal-set condition is m(x(k))
          step.thm2 = std::move(c);
        }
        break;
      }
      case Controller::Kind::Mpcs: {
        MpcsStepRecord rec;
        if (controller.mpcs.rf_mode == RfMode::InvariantSet) {
          if (!fs_ready) {
            const double level0 = gridded_one_step(model, l, sets, controller.mpcs.grid, x);
            if (!std::isfinite(level0)) {
              trace.classification = RunClass::InfeasibleAt;
              trace.infeasible_k = k;
              trace.x_final = x;
              return trace;
            }
            fs = compute_feasible_set(model, l, sets, level0, controller.mpcs.grid);
            fs_ready = true;
          } else {
            const int idx = fs.snap_index(x);
            if (idx >= 0 && std::isfinite(fs.m_cell[idx]) &&
                fs.m_cell[idx] < fs.alpha - 1e-12) {
              fs = restrict_to_level(fs, model, l, sets, fs.m_cell[idx]);
            }
          }
          rec = mpcs_step_rf(model, l, sets, controller.mpcs, x, fs);
        } else {
          rec = mpcs_step(model, l, sets, controller.mpcs, x);
        }
        if (!rec.feasible) {
          trace.classification = RunClass::InfeasibleAt;
          trace.infeasible_k = k;
          trace.x_final = x;
          return trace;
        }
        step.u = rec.applied_u;
        step.j_star = rec.sol.j_star;
        step.alpha = rec.alpha;
        if (monitors.thm1 && rec.sol.optimal()) {
          Certificate c = check_thm1(rec.sol, model, l, sets);
          c.k = k;
          step.thm1 = std::move(c);
        }
        break;
      }
    }

    x = model.step(x, step.u);
    trace.steps.push_back(std::move(step));
  }

  cls.observe(x, static_cast<int>(trace.steps.size()));
  trace.x_final = x;
  trace.classification = cls.done() ? cls.result() : RunClass::MaxSteps;
  trace.converged_at = cls.converged_at();
  return trace;
}

std::vector<RunSummary> compare_runs(const std::vector<std::string>& names,
                                     const std::vector<const ClosedLoopTrace*>& traces) {
  if (names.size() != traces.size()) throw ArgumentError("one name per trace");
  if (traces.empty()) return {};
  const Vec& x0 = traces.front()->x0();
  for (const ClosedLoopTrace* t : traces) {
    if (t->x0().size() != x0.size() || (t->x0() - x0).norm() > 0.0) {
      throw ArgumentError("compare_runs requires traces sharing the initial state");
    }
  }
  std::vector<RunSummary> rows;
  for (size_t i = 0; i < traces.size(); ++i) {
    const ClosedLoopTrace& t = *traces[i];
    RunSummary r;
    r.name = names[i];
    r.classification = t.classification;
    r.infeasible_k = t.infeasible_k;
    r.final_norm = t.x_final.norm();
    r.steps_to_converge = t.converged_at;
    for (size_t k = 0; k + 1 < t.steps.size(); ++k) {
      if (t.steps[k].alpha && t.steps[k + 1].alpha &&
          *t.steps[k + 1].alpha > *t.steps[k].alpha + kCertTol) {
        r.alpha_monotone = false;
      }
      if (t.steps[k].j_star && t.steps[k + 1].j_star &&
          *t.steps[k + 1].j_star > *t.steps[k].j_star + kCertTol) {
        r.j_star_monotone = false;
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string summary_table(const std::vector<RunSummary>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "run" << std::setw(16) << "class" << std::setw(14)
     << "final_norm" << std::setw(12) << "steps_conv" << std::setw(10) << "alpha_mono"
     << "jstar_mono\n";
  for (const RunSummary& r : rows) {
    std::string cls = to_string(r.classification);
    if (r.classification == RunClass::InfeasibleAt) {
      cls += "@" + std::to_string(r.infeasible_k);
    }
    std::ostringstream fn;
    fn.precision(4);
    fn << std::scientific << r.final_norm;
    os << std::left << std::setw(18) << r.name << std::setw(16) << cls << std::setw(14)
       << fn.str() << std::setw(12) << r.steps_to_converge << std::setw(10)
       << (r.alpha_monotone ? "yes" : "no") << (r.j_star_monotone ? "yes" : "no") << '\n';
  }
  return os.str();
}

}  // namespace mpcs
