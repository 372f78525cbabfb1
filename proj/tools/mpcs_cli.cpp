#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mpcs/scenario.hpp"

namespace fs = std::filesystem;
using namespace mpcs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

SystemModel agent_model() {
  Mat A(2, 2), B(2, 1);
  A << 0.7, 0.1, 0.8, 0.6;
  B << 0.8, -0.5;
  return SystemModel::linear(A, B);
}

int cmd_certify_first_order(double a, double b, double q, double r, int steps) {
  const FirstOrderRegion region = first_order_region(a, b, q, r);
  std::cout.precision(10);
  std::cout << "closed_loop_pole " << region.closed_loop_pole << '\n'
            << "new_condition " << (region.new_condition ? "true" : "false")
            << "   (|a r / (r + b^2 q)| < 1)\n"
            << "prior_condition " << (region.prior_condition ? "true" : "false")
            << "   (a^2 r / (r + b^2 q) < 1)\n";

  // Cross-check: the simulated N = 1 closed loop must realize exactly this pole.
  Mat Am(1, 1), Bm(1, 1), Qm(1, 1), Rm(1, 1);
  Am << a;
  Bm << b;
  Qm << q;
  Rm << r;
  const SystemModel model = SystemModel::linear(Am, Bm);
  const StageCost cost = StageCost::quadratic(Qm, Rm);
  const ConstraintSets sets = ConstraintSets::none();
  const ClosedLoopTrace trace = simulate(model, cost, sets, Controller::mpc(1),
                                         Vec::Constant(1, 1.0), steps);
  double worst = 0.0;
  for (size_t k = 0; k + 1 < trace.steps.size(); ++k) {
    const double predicted = region.closed_loop_pole * trace.steps[k].x[0];
    const double actual = trace.steps[k + 1].x[0];
    worst = std::max(worst,
                     std::abs(actual - predicted) / std::max(1.0, std::abs(actual)));
  }
  std::cout << "simulated " << trace.steps.size() << " steps, max pole mismatch " << worst
            << '\n';
  if (worst > 1e-9) {
    std::cerr << "error: simulated trajectory disagrees with the closed-form pole\n";
    return kExitNumerical;
  }
  return kExitOk;
}

Mat reweighted_Q() {
  Mat Q = Mat::Zero(2, 2);
  Q(0, 0) = 1.0;
  Q(1, 1) = 0.25;  // diag(1, 0.5^2)
  return Q;
}

int cmd_run_example(const std::string& name, const std::string& out_dir, int steps) {
  const SystemModel model = agent_model();
  const ConstraintSets sets = ConstraintSets::none();
  Vec x0(2);
  x0 << 1.0, 1.0;

  Mat Q = Mat::Identity(2, 2);
  Mat R = Mat::Zero(1, 1);
  Controller controller;
  Monitors monitors;
  if (name == "agent-open") {
    controller = Controller::open_loop();
  } else if (name == "agent-mpc") {
    controller = Controller::mpc(1);
    monitors = {true, true};
  } else if (name == "agent-reweighted") {
    Q = reweighted_Q();
    controller = Controller::mpc(1);
    monitors = {true, true};
  } else if (name == "agent-n2") {
    controller = Controller::mpc(2);
    monitors = {true, true};
  } else if (name == "agent-mpcs") {
    MpcsConfig mc;
    mc.N = 1;
    mc.delta = 0.05;  // strict variant: the plain constraint only yields boundedness
    controller = Controller::mpcs_controller(mc);
    monitors = {true, false};
  } else {
    std::cerr << "unknown example '" << name
              << "' (expected agent-open|agent-mpc|agent-reweighted|agent-n2|agent-mpcs)\n";
    return kExitConfig;
  }

  const StageCost cost = StageCost::quadratic(Q, R);
  const ClosedLoopTrace trace = simulate(model, cost, sets, controller, x0, steps, monitors);

  const fs::path dir(out_dir);
  write_file(dir / (name + "_trace.csv"), trace.to_csv());
  write_file(dir / (name + "_certs.csv"), trace.certificates_csv());

  std::cout.precision(10);
  std::cout << name << ": " << to_string(trace.classification);
  if (trace.classification == RunClass::InfeasibleAt) std::cout << " k=" << trace.infeasible_k;
  if (trace.converged_at >= 0) std::cout << " converged_at=" << trace.converged_at;
  std::cout << " steps=" << trace.steps.size() << " final_norm=" << trace.x_final.norm()
            << '\n';
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, int steps_override, double delta_override,
                 const std::string& out_dir) {
  ScenarioConfig cfg = load_scenario_file(config_path);
  if (steps_override >= 0) cfg.steps = steps_override;
  if (delta_override >= 0 && cfg.controller.kind == Controller::Kind::Mpcs) {
    cfg.controller.mpcs.delta = delta_override;
  }
  const SystemModel model = cfg.make_model();
  const StageCost cost = cfg.make_cost();
  const ClosedLoopTrace trace =
      simulate(model, cost, cfg.sets, cfg.controller, cfg.x0, cfg.steps, cfg.monitors);

  const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  const std::string trace_name = cfg.trace_out.empty() ? "trace.csv" : cfg.trace_out;
  write_file(dir / trace_name, trace.to_csv());
  if (!cfg.cert_out.empty() || cfg.monitors.thm1 || cfg.monitors.thm2) {
    const std::string cert_name = cfg.cert_out.empty() ? "certs.csv" : cfg.cert_out;
    write_file(dir / cert_name, trace.certificates_csv());
  }

  std::cout.precision(10);
  std::cout << "classification " << to_string(trace.classification);
  if (trace.classification == RunClass::InfeasibleAt) {
    std::cout << " k=" << trace.infeasible_k;
  }
  std::cout << " steps=" << trace.steps.size() << " final_norm=" << trace.x_final.norm()
            << '\n';
  if (trace.classification == RunClass::InfeasibleAt) {
    std::cerr << "infeasible at step " << trace.infeasible_k << '\n';
    return kExitInfeasible;
  }
  return kExitOk;
}

int cmd_feasible_set(const std::string& config_path, double alpha, int grid_cells,
                     const std::string& out_file) {
  ScenarioConfig cfg = load_scenario_file(config_path);
  const SystemModel model = cfg.make_model();
  if (model.state_dim() > 2) {
    std::cerr << "feasible-set supports n <= 2 state dimensions\n";
    return kExitConfig;
  }
  const StageCost cost = cfg.make_cost();

  StateGrid grid = cfg.controller.mpcs.grid;
  if (grid.lo.size() == 0) {
    std::cerr << "scenario needs a controller grid_box block for feasible-set\n";
    return kExitConfig;
  }
  if (grid_cells > 0) grid.cells = grid_cells;

  double level = alpha;
  if (level < 0) {
    const OneStepValue osv = one_step_value(model, cost, cfg.sets, cfg.x0);
    if (!osv.feasible) {
      std::cerr << "one-step problem infeasible at x0; cannot derive alpha\n";
      return kExitInfeasible;
    }
    level = osv.m_val;
  }

  const FeasibleSet set = compute_feasible_set(model, cost, cfg.sets, level, grid);
  write_file(fs::path(out_file), set.to_csv());
  std::cout.precision(10);
  std::cout << "alpha " << level << " member_cells " << set.member_count() << " of "
            << set.member.size() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon MPC without terminal weight: stability certificates, the "
               "MPCS algorithm, and closed-loop simulation"};
  app.require_subcommand(1);
  long long seed = 0;
  app.add_option("--seed", seed, "reserved; all algorithms are deterministic");

  auto* cfo = app.add_subcommand("certify-first-order",
                                 "Evaluate the first-order stability conditions");
  double a = 0, b = 0, q = 1, r = 0;
  int cfo_steps = 20;
  cfo->add_option("a", a, "state coefficient")->required();
  cfo->add_option("b", b, "input coefficient")->required();
  cfo->add_option("q", q, "state weight (> 0)")->required();
  cfo->add_option("r", r, "control weight (>= 0)")->required();
  cfo->add_option("--steps", cfo_steps, "simulation cross-check length");

  auto* rex = app.add_subcommand("run-example", "Reproduce a named agent example");
  std::string ex_name, ex_out = ".";
  int ex_steps = 400;
  rex->add_option("name", ex_name,
                  "agent-open|agent-mpc|agent-reweighted|agent-n2|agent-mpcs")
      ->required();
  rex->add_option("--out", ex_out, "output directory");
  rex->add_option("--steps", ex_steps, "simulation length");

  auto* sim = app.add_subcommand("simulate", "Run a scenario config");
  std::string sim_config, sim_out;
  int sim_steps = -1;
  double sim_delta = -1;
  sim->add_option("config", sim_config, "scenario file")->required();
  sim->add_option("--steps", sim_steps, "override run.steps");
  sim->add_option("--delta", sim_delta, "override MPCS delta");
  sim->add_option("--out", sim_out, "output directory");

  auto* fset = app.add_subcommand("feasible-set", "Export the control invariant set");
  std::string fs_config, fs_out = "feasible_set.csv";
  double fs_alpha = -1;
  int fs_grid = -1;
  fset->add_option("config", fs_config, "scenario file")->required();
  fset->add_option("--alpha", fs_alpha, "level (default: m(x0))");
  fset->add_option("--grid", fs_grid, "override nodes per axis");
  fset->add_option("--out", fs_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cfo->parsed()) return cmd_certify_first_order(a, b, q, r, cfo_steps);
    if (rex->parsed()) return cmd_run_example(ex_name, ex_out, ex_steps);
    if (sim->parsed()) return cmd_simulate(sim_config, sim_steps, sim_delta, sim_out);
    if (fset->parsed()) return cmd_feasible_set(fs_config, fs_alpha, fs_grid, fs_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
