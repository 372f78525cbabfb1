#include "mpcs/mpcs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mpcs/kernels.hpp"

namespace mpcs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamped_bound(double alpha, double delta) {
  // The stage cost is nonnegative, so a negative right-hand side would be
  // vacuously infeasible; the tightest meaningful bound is zero.
  return std::max(alpha - delta, 0.0);
}

// Scalar control range for grid scans when the input box is unbounded:
// controls able to keep some box state inside the state box (linear models),
// padded. Falls back to a span derived from the stage-cost minimizer.
struct ControlRange {
  double lo = 0.0, hi = 0.0;
};

ControlRange derive_control_range(const SystemModel& model, const ConstraintSets& sets,
                                  const Vec& box_lo, const Vec& box_hi) {
  if (sets.input.is_bounded()) {
    return {-sets.input.u_max[0], sets.input.u_max[0]};
  }
  if (!model.is_linear()) {
    throw UnsupportedError("grid scans need a bounded input box for nonlinear models");
  }
  const Mat& A = model.A();
  const Vec b = model.B().col(0);
  const Vec center = 0.5 * (box_lo + box_hi);
  const Vec half = 0.5 * (box_hi - box_lo);
  double lo = -kInf, hi = kInf;
  bool any = false;
  for (int c = 0; c < A.rows(); ++c) {
    if (std::abs(b[c]) < 1e-14) continue;
    any = true;
    const double ax_c = A.row(c).dot(center);
    const double ax_r = A.row(c).cwiseAbs().dot(half);
    double a1 = (box_lo[c] - (ax_c + ax_r)) / b[c];
    double a2 = (box_hi[c] - (ax_c - ax_r)) / b[c];
    if (a1 > a2) std::swap(a1, a2);
    lo = std::max(lo, a1);
    hi = std::min(hi, a2);
  }
  if (!any || !(lo < hi)) return {0.0, 0.0};
  const double pad = 0.05 * (hi - lo);
  lo = std::min(lo - pad, 0.0);
  hi = std::max(hi + pad, 0.0);
  return {lo, hi};
}

// Shared machinery for the node-centered grid sweeps.
class GridScanner {
 public:
  GridScanner(const SystemModel& model, const StageCost& l, const ConstraintSets& sets,
              const StateGrid& grid)
      : model_(model), l_(l), sets_(sets), grid_(grid), n_(model.state_dim()) {
    if (n_ < 1 || n_ > 2) throw UnsupportedError("feasible-set grids support n <= 2");
    if (model.input_dim() != 1) {
      throw UnsupportedError("feasible-set grids support scalar inputs only");
    }
    if (grid_.lo.size() != n_ || grid_.hi.size() != n_) {
      throw ShapeError("grid box dimension must match the state dimension");
    }
    if (grid_.cells < 2) throw ArgumentError("grid needs at least 2 nodes per axis");
    for (int a = 0; a < n_; ++a) {
      if (!(grid_.lo[a] < grid_.hi[a])) throw ArgumentError("grid box must satisfy lo < hi");
      if (grid_.lo[a] > 0.0 || grid_.hi[a] < 0.0) {
        throw ArgumentError("grid box must contain the origin");
      }
      h_[a] = (grid_.hi[a] - grid_.lo[a]) / (grid_.cells - 1);
    }
    node_count_ = 1;
    for (int a = 0; a < n_; ++a) node_count_ *= grid_.cells;
    if (static_cast<double>(node_count_) * grid_.control_samples > 5e8) {
      throw BudgetError("feasible-set grid exceeds the evaluation budget");
    }

    const ControlRange cr = derive_control_range(model_, sets_, grid_.lo, grid_.hi);
    const int samples = std::max(2, grid_.control_samples);
    ug_.count = samples;
    ug_.u0 = cr.lo;
    ug_.du = (cr.hi - cr.lo) / (samples - 1);
    if (ug_.du == 0.0) ug_.count = 1;

    cost_.resize(ug_.count);
    x1_.resize(ug_.count);
    x2_.resize(ug_.count);
    feas_.resize(ug_.count);

    fast_ = model_.is_linear() && l_.is_quadratic();
    if (sets_.state.kind == StateSet::Kind::Box) {
      for (int a = 0; a < n_; ++a) {
        xlo_[a] = sets_.state.lo[a];
        xhi_[a] = sets_.state.hi[a];
      }
    } else {
      for (int a = 0; a < n_; ++a) {
        xlo_[a] = -kInf;
        xhi_[a] = kInf;
      }
    }
  }

  int node_count() const { return node_count_; }

  Vec node(int flat) const {
    Vec x(n_);
    if (n_ == 1) {
      x[0] = grid_.lo[0] + flat * h_[0];
    } else {
      x[0] = grid_.lo[0] + (flat / grid_.cells) * h_[0];
      x[1] = grid_.lo[1] + (flat % grid_.cells) * h_[1];
    }
    return x;
  }

  int snap(const Vec& x) const {
    int flat = 0;
    for (int a = 0; a < n_; ++a) {
      const long i = std::lround((x[a] - grid_.lo[a]) / h_[a]);
      if (i < 0 || i >= grid_.cells) return -1;
      flat = flat * grid_.cells + static_cast<int>(i);
    }
    return flat;
  }

  // One-cell interior margin toward the grid-box boundary: successors that
  // land in the outermost ring count as escaped, keeping the set an
  // under-approximation.
  bool margin_ok(double y0, double y1) const {
    if (y0 < grid_.lo[0] + h_[0] - 1e-12 || y0 > grid_.hi[0] - h_[0] + 1e-12) return false;
    if (n_ == 2) {
      if (y1 < grid_.lo[1] + h_[1] - 1e-12 || y1 > grid_.hi[1] - h_[1] + 1e-12) return false;
    }
    return true;
  }

  // Fill the scratch arrays with the control scan at node state x.
  void scan(const Vec& x) {
    if (fast_ && n_ == 2) {
      const Vec ax = model_.A() * x;
      const double axv[2] = {ax[0], ax[1]};
      const double bv[2] = {model_.B()(0, 0), model_.B()(1, 0)};
      const Mat& Q = l_.Q();
      kernels::scan_controls_2d(axv, bv, Q(0, 0), Q(0, 1), Q(1, 1), l_.R()(0, 0), ug_,
                                xlo_, xhi_, kSetTol, cost_.data(), x1_.data(), x2_.data(),
                                feas_.data());
      return;
    }
    if (fast_ && n_ == 1) {
      const double ax = model_.A()(0, 0) * x[0];
      kernels::scan_controls_1d(ax, model_.B()(0, 0), l_.Q()(0, 0), l_.R()(0, 0), ug_,
                                xlo_[0], xhi_[0], kSetTol, cost_.data(), x1_.data(),
                                feas_.data());
      return;
    }
    Vec u(1);
    for (int j = 0; j < ug_.count; ++j) {
      u[0] = ug_.u0 + j * ug_.du;
      const Vec y = model_.step(x, u);
      x1_[j] = y[0];
      x2_[j] = n_ == 2 ? y[1] : 0.0;
      cost_[j] = l_(y, u);
      feas_[j] = sets_.state.contains(y) ? 1 : 0;
    }
  }

  // The sampled grid rarely contains u = 0 exactly, but the origin fixed
  // point (A1) depends on it: without the zero control the gridded one-step
  // value is floored by quantization and low-level sets collapse. Every
  // evaluation therefore merges an explicit u = 0 candidate.
  struct ZeroEval {
    bool feasible = false;
    double cost = kInf;
    Vec x_next;
  };

  ZeroEval eval_zero(const Vec& x) const {
    ZeroEval z;
    z.x_next = model_.step(x, Vec::Zero(1));
    z.feasible = sets_.state.contains(z.x_next);
    if (z.feasible) z.cost = l_(z.x_next, Vec::Zero(1));
    return z;
  }

  double min_feasible_cost(const Vec& x) {
    scan(x);
    const int best = kernels::argmin_feasible(cost_.data(), feas_.data(), ug_.count);
    double m = best < 0 ? kInf : cost_[best];
    const ZeroEval z = eval_zero(x);
    if (z.feasible) m = std::min(m, z.cost);
    return m;
  }

  void seed(FeasibleSet& fs) {
    fs.member.assign(node_count_, 0);
    fs.m_cell.assign(node_count_, kInf);
    const double tol = 1e-12 * std::max(1.0, fs.alpha);
    for (int i = 0; i < node_count_; ++i) {
      const Vec x = node(i);
      if (!sets_.state.contains(x)) continue;
      const double m = min_feasible_cost(x);
      if (!std::isfinite(m)) continue;
      fs.m_cell[i] = m;
      if (m <= fs.alpha + tol) fs.member[i] = 1;
    }
  }

  int sweep(FeasibleSet& fs) {
    std::vector<int> to_remove;
    for (int i = 0; i < node_count_; ++i) {
      if (!fs.member[i]) continue;
      const Vec x = node(i);
      scan(x);
      bool found = false;
      auto successor_in_set = [&](double y0, double y1) {
        if (!margin_ok(y0, y1)) return false;
        Vec y(n_);
        y[0] = y0;
        if (n_ == 2) y[1] = y1;
        const int idx = snap(y);
        return idx >= 0 && fs.member[idx] != 0;
      };
      for (int j = 0; j < ug_.count && !found; ++j) {
        if (!feas_[j]) continue;
        found = successor_in_set(x1_[j], n_ == 2 ? x2_[j] : 0.0);
      }
      if (!found) {
        const ZeroEval z = eval_zero(x);
        if (z.feasible) {
          found = successor_in_set(z.x_next[0], n_ == 2 ? z.x_next[1] : 0.0);
        }
      }
      if (!found) to_remove.push_back(i);
    }
    for (int i : to_remove) fs.member[i] = 0;
    return static_cast<int>(to_remove.size());
  }

  kernels::ScanGrid control_grid() const { return ug_; }

 private:
  const SystemModel& model_;
  const StageCost& l_;
  const ConstraintSets& sets_;
  StateGrid grid_;
  int n_;
  int node_count_ = 0;
  double h_[2] = {1.0, 1.0};
  double xlo_[2] = {0, 0}, xhi_[2] = {0, 0};
  kernels::ScanGrid ug_;
  bool fast_ = false;
  std::vector<double> cost_, x1_, x2_;
  std::vector<std::uint8_t> feas_;
};

}  // namespace

int FeasibleSet::member_count() const {
  int c = 0;
  for (std::uint8_t m : member) c += m;
  return c;
}

int FeasibleSet::snap_index(const Vec& x) const {
  if (x.size() != n) throw ShapeError("state dimension mismatch");
  int flat = 0;
  for (int a = 0; a < n; ++a) {
    const double h = (grid.hi[a] - grid.lo[a]) / (grid.cells - 1);
    const long i = std::lround((x[a] - grid.lo[a]) / h);
    if (i < 0 || i >= grid.cells) return -1;
    flat = flat * grid.cells + static_cast<int>(i);
  }
  return flat;
}

bool FeasibleSet::contains_point(const Vec& x) const {
  const int flat = snap_index(x);
  return flat >= 0 && member[flat] != 0;
}

Vec FeasibleSet::node_center(int flat_index) const {
  Vec x(n);
  if (n == 1) {
    x[0] = grid.lo[0] + flat_index * (grid.hi[0] - grid.lo[0]) / (grid.cells - 1);
  } else {
    const double h0 = (grid.hi[0] - grid.lo[0]) / (grid.cells - 1);
    const double h1 = (grid.hi[1] - grid.lo[1]) / (grid.cells - 1);
    x[0] = grid.lo[0] + (flat_index / grid.cells) * h0;
    x[1] = grid.lo[1] + (flat_index % grid.cells) * h1;
  }
  return x;
}

std::string FeasibleSet::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << (n == 1 ? "x1,member\n" : "x1,x2,member\n");
  for (size_t i = 0; i < member.size(); ++i) {
    const Vec x = node_center(static_cast<int>(i));
    os << x[0];
    if (n == 2) os << ',' << x[1];
    os << ',' << int(member[i]) << '\n';
  }
  return os.str();
}

MpcsStepRecord mpcs_step(const SystemModel& model, const StageCost& l,
                         const ConstraintSets& sets, const MpcsConfig& cfg, const Vec& x) {
  if (cfg.N < 1) throw ArgumentError("MPCS horizon must satisfy N >= 1");
  if (cfg.delta < 0.0) throw ArgumentError("MPCS delta must be nonnegative");
  MpcsStepRecord rec;
  const OneStepValue osv = one_step_value(model, l, sets, x);
  if (!osv.feasible) return rec;
  rec.alpha = osv.m_val;
  const double bound = clamped_bound(rec.alpha, cfg.delta);

  if (cfg.N == 1) {
    const BoundedTailSolution bt = solve_one_stage_bounded_tail(model, l, sets, x, bound);
    if (bt.status == SolveStatus::Infeasible) return rec;
    rec.feasible = true;
    rec.sol.status = bt.status;
    rec.sol.u_star = {bt.u0};
    rec.sol.x_star = {bt.x1};
    rec.sol.j_star = bt.j_star;
    rec.applied_u = bt.u0;
    rec.tail_u = bt.u_tail;
    rec.constraint_lhs = bt.tail_cost;
    return rec;
  }

  const HorizonSolution sol =
      solve_horizon(model, l, sets, x, cfg.N, ExtraConstraint{bound});
  if (sol.status == SolveStatus::Infeasible) return rec;
  rec.feasible = true;
  rec.sol = sol;
  rec.applied_u = sol.u_star.front();
  rec.tail_u = sol.u_star[1];
  rec.constraint_lhs = l(sol.x_star[1], sol.u_star[1]);
  return rec;
}

MpcsStepRecord mpcs_step_nested(const SystemModel& model, const StageCost& l,
                                const ConstraintSets& sets, const MpcsConfig& cfg,
                                const Vec& x) {
  if (cfg.N != 1) throw ArgumentError("the nested reduction applies to N = 1 only");
  if (model.input_dim() != 1) {
    throw UnsupportedError("the nested reduction is implemented for scalar inputs");
  }
  MpcsStepRecord rec;
  const OneStepValue osv = one_step_value(model, l, sets, x);
  if (!osv.feasible) return rec;
  rec.alpha = osv.m_val;
  const double bound = clamped_bound(rec.alpha, cfg.delta);

  // Scan u(k|k), requiring m(x(k+1)) <= bound for the inner one-step value.
  double ulo, uhi;
  if (sets.input.is_bounded()) {
    ulo = -sets.input.u_max[0];
    uhi = sets.input.u_max[0];
  } else if (model.is_linear()) {
    // Cover both the stage-cost minimizer and the m-minimizer.
    const Vec ax = model.A() * x;
    const Vec b = model.B().col(0);
    const double c2 = b.dot(l.Q() * b) + l.R()(0, 0);
    const double uc = c2 > 1e-14 ? -b.dot(l.Q() * ax) / c2 : 0.0;
    const double width = 4.0 * (1.0 + std::abs(uc) + x.lpNorm<Eigen::Infinity>());
    ulo = uc - width;
    uhi = uc + width;
  } else {
    throw UnsupportedError("nested reduction needs a bounded input box here");
  }

  const int samples = 401;
  const double du = (uhi - ulo) / (samples - 1);
  Vec u(1);
  double best_u = 0.0, best_j = kInf;
  auto feasible_value = [&](double uv, double& j_out) {
    u[0] = uv;
    const Vec x1 = model.step(x, u);
    if (!sets.state.contains(x1)) return false;
    const OneStepValue inner = one_step_value(model, l, sets, x1);
    if (!inner.feasible || inner.m_val > bound + 1e-10) return false;
    j_out = l(x1, u);
    return true;
  };
  for (int j = 0; j < samples; ++j) {
    double val;
    if (feasible_value(ulo + j * du, val) && val < best_j) {
      best_j = val;
      best_u = ulo + j * du;
    }
  }
  if (!std::isfinite(best_j)) return rec;

  double h = du;
  for (int it = 0; it < 300; ++it) {
    bool improved = false;
    for (double sgn : {1.0, -1.0}) {
      const double cand = std::clamp(best_u + sgn * h, ulo, uhi);
      double val;
      if (feasible_value(cand, val) && val < best_j) {
        best_j = val;
        best_u = cand;
        improved = true;
      }
    }
    if (!improved) {
      h *= 0.5;
      if (h < 1e-12 * std::max(1.0, uhi - ulo)) break;
    }
  }

  u[0] = best_u;
  const Vec x1 = model.step(x, u);
  const OneStepValue inner = one_step_value(model, l, sets, x1);
  rec.feasible = true;
  rec.sol.status = SolveStatus::Optimal;
  rec.sol.u_star = {u};
  rec.sol.x_star = {x1};
  rec.sol.j_star = best_j;
  rec.applied_u = u;
  rec.tail_u = inner.u_star;
  rec.constraint_lhs = inner.m_val;
  return rec;
}

ClosedLoopTrace run_mpcs(const SystemModel& model, const StageCost& l,
                         const ConstraintSets& sets, const MpcsConfig& cfg, const Vec& x0,
                         int steps) {
  if (steps < 0) throw ArgumentError("steps must be nonnegative");
  if (!sets.state.contains(x0)) throw ArgumentError("x0 lies outside the state set");

  ClosedLoopTrace trace;
  Classifier cls(x0, ClassifyRules{});
  Vec x = x0;
  const bool use_rf = cfg.rf_mode == RfMode::InvariantSet;
  FeasibleSet fs;
  bool fs_ready = false;

  for (int k = 0; k < steps; ++k) {
    cls.observe(x, k);
    if (cls.done()) break;

    MpcsStepRecord rec;
    if (use_rf) {
      if (!fs_ready) {
        const double level0 = gridded_one_step(model, l, sets, cfg.grid, x);
        if (!std::isfinite(level0)) {
          trace.classification = RunClass::InfeasibleAt;
          trace.infeasible_k = k;
          trace.x_final = x;
          return trace;
        }
        fs = compute_feasible_set(model, l, sets, level0, cfg.grid);
        fs_ready = true;
      } else {
        const int idx = fs.snap_index(x);
        if (idx >= 0 && std::isfinite(fs.m_cell[idx]) && fs.m_cell[idx] < fs.alpha - 1e-12) {
          fs = restrict_to_level(fs, model, l, sets, fs.m_cell[idx]);
        }
      }
      rec = mpcs_step_rf(model, l, sets, cfg, x, fs);
    } else {
      rec = mpcs_step(model, l, sets, cfg, x);
    }
    if (!rec.feasible) {
      trace.classification = RunClass::InfeasibleAt;
      trace.infeasible_k = k;
      trace.x_final = x;
      return trace;
    }
    TraceStep step;
    step.k = k;
    step.x = x;
    step.u = rec.applied_u;
    step.j_star = rec.sol.j_star;
    step.alpha = rec.alpha;
    trace.steps.push_back(std::move(step));
    x = model.step(x, rec.applied_u);
  }
  cls.observe(x, static_cast<int>(trace.steps.size()));
  trace.x_final = x;
  trace.classification = cls.done() ? cls.result() : RunClass::MaxSteps;
  trace.converged_at = cls.converged_at();
  return trace;
}

FeasibleSet compute_feasible_set(const SystemModel& model, const StageCost& l,
                                 const ConstraintSets& sets, double alpha,
                                 const StateGrid& grid) {
  if (alpha < 0.0) throw ArgumentError("alpha must be nonnegative");
  FeasibleSet fs;
  fs.grid = grid;
  fs.n = model.state_dim();
  fs.alpha = alpha;
  GridScanner scanner(model, l, sets, grid);
  scanner.seed(fs);
  while (scanner.sweep(fs) > 0) {
  }
  return fs;
}

int refine_sweep(FeasibleSet& fs, const SystemModel& model, const StageCost& l,
                 const ConstraintSets& sets) {
  GridScanner scanner(model, l, sets, fs.grid);
  return scanner.sweep(fs);
}

double gridded_one_step(const SystemModel& model, const StageCost& l,
                        const ConstraintSets& sets, const StateGrid& grid, const Vec& x) {
  GridScanner scanner(model, l, sets, grid);
  const int idx = scanner.snap(x);
  if (idx < 0) return kInf;
  const Vec node = scanner.node(idx);
  if (!sets.state.contains(node)) return kInf;
  return scanner.min_feasible_cost(node);
}

FeasibleSet restrict_to_level(const FeasibleSet& fs, const SystemModel& model,
                              const StageCost& l, const ConstraintSets& sets,
                              double alpha) {
  if (alpha > fs.alpha + 1e-12) {
    throw ArgumentError("restrict_to_level only lowers the level");
  }
  FeasibleSet out = fs;
  out.alpha = alpha;
  const double tol = 1e-12 * std::max(1.0, alpha);
  for (size_t i = 0; i < out.member.size(); ++i) {
    if (out.member[i] && out.m_cell[i] > alpha + tol) out.member[i] = 0;
  }
  GridScanner scanner(model, l, sets, out.grid);
  while (scanner.sweep(out) > 0) {
  }
  return out;
}

MpcsStepRecord mpcs_step_rf(const SystemModel& model, const StageCost& l,
                            const ConstraintSets& sets, const MpcsConfig& cfg, const Vec& x,
                            const FeasibleSet& fs_in) {
  if (model.input_dim() != 1) {
    throw UnsupportedError("invariant-set MPCS is implemented for scalar inputs");
  }
  MpcsStepRecord rec;
  const OneStepValue osv = one_step_value(model, l, sets, x);
  if (!osv.feasible) return rec;
  rec.alpha = osv.m_val;

  // The level is quantized with the node's gridded one-step value, keeping
  // the start consistent with the set it came from.
  const int idx = fs_in.snap_index(x);
  if (idx < 0 || !std::isfinite(fs_in.m_cell[idx])) return rec;
  const double level = fs_in.m_cell[idx];
  const FeasibleSet* fs = &fs_in;
  FeasibleSet restricted;
  if (level < fs_in.alpha - 1e-12) {
    restricted = restrict_to_level(fs_in, model, l, sets, level);
    fs = &restricted;
  }
  if (!fs->member[idx]) return rec;  // Theorem-5 hypothesis fails here

  // min over u0 of l(x1, u0) + J*_{N-1}(x1) with x1 constrained into the set.
  double ulo, uhi;
  {
    const ControlRange cr = derive_control_range(model, sets, fs->grid.lo, fs->grid.hi);
    ulo = cr.lo;
    uhi = cr.hi;
  }
  const int samples = std::max(2, fs->grid.control_samples);
  const double du = (uhi - ulo) / (samples - 1);

  Vec u(1);
  auto tail_value = [&](const Vec& x1, HorizonSolution* tail_sol) -> double {
    if (cfg.N == 1) return 0.0;
    if (cfg.N == 2) {
      const OneStepValue inner = one_step_value(model, l, sets, x1);
      if (!inner.feasible) return kInf;
      if (tail_sol) {
        tail_sol->status = SolveStatus::Optimal;
        tail_sol->u_star = {inner.u_star};
        tail_sol->x_star = {inner.x_next};
        tail_sol->j_star = inner.m_val;
      }
      return inner.m_val;
    }
    const HorizonSolution t = solve_horizon(model, l, sets, x1, cfg.N - 1);
    if (t.status == SolveStatus::Infeasible) return kInf;
    if (tail_sol) *tail_sol = t;
    return t.j_star;
  };

  auto evaluate = [&](double uv, double& j_out) {
    u[0] = uv;
    const Vec x1 = model.step(x, u);
    if (!sets.state.contains(x1)) return false;
    if (!fs->contains_point(x1)) return false;
    const double tail = tail_value(x1, nullptr);
    if (!std::isfinite(tail)) return false;
    j_out = l(x1, u) + tail;
    return true;
  };

  double best_u = 0.0, best_j = kInf;
  for (int j = 0; j < samples; ++j) {
    double val;
    if (evaluate(ulo + j * du, val) && val < best_j) {
      best_j = val;
      best_u = ulo + j * du;
    }
  }
  if (!std::isfinite(best_j)) return rec;

  double h = du;
  for (int it = 0; it < 300; ++it) {
    bool improved = false;
    for (double sgn : {1.0, -1.0}) {
      const double cand = std::clamp(best_u + sgn * h, ulo, uhi);
      double val;
      if (evaluate(cand, val) && val < best_j) {
        best_j = val;
        best_u = cand;
        improved = true;
      }
    }
    if (!improved) {
      h *= 0.5;
      if (h < 1e-12 * std::max(1.0, uhi - ulo)) break;
    }
  }

  u[0] = best_u;
  const Vec x1 = model.step(x, u);
  HorizonSolution tail_sol;
  const double tail = tail_value(x1, &tail_sol);
  if (!std::isfinite(tail)) return rec;

  rec.feasible = true;
  rec.sol.status = SolveStatus::Optimal;
  rec.sol.u_star = {u};
  rec.sol.x_star = {x1};
  for (size_t i = 0; i < tail_sol.u_star.size() && i + 1 < static_cast<size_t>(cfg.N);
       ++i) {
    rec.sol.u_star.push_back(tail_sol.u_star[i]);
    rec.sol.x_star.push_back(tail_sol.x_star[i]);
  }
  rec.sol.j_star = best_j;
  rec.applied_u = u;
  if (cfg.N >= 2 && rec.sol.u_star.size() >= 2) {
    rec.tail_u = rec.sol.u_star[1];
    rec.constraint_lhs = l(rec.sol.x_star[1], rec.sol.u_star[1]);
  } else {
    const OneStepValue inner = one_step_value(model, l, sets, x1);
    rec.tail_u = inner.feasible ? inner.u_star : Vec::Zero(1);
    rec.constraint_lhs = inner.feasible ? inner.m_val : kInf;
  }
  return rec;
}

}  // namespace mpcs
