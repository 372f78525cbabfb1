#include "mpcs/solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpcs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat pinv_psd(const Mat& S, int* rank_out) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  const Vec w = es.eigenvalues();
  const Mat V = es.eigenvectors();
  const double wmax = w.size() ? std::max(0.0, w.cwiseAbs().maxCoeff()) : 0.0;
  if (w.size() && w.minCoeff() < -1e-9 * std::max(1.0, wmax)) {
    throw SingularityError("R + B'QB must be positive semidefinite");
  }
  const double cut = std::max(wmax, 1.0) * 1e-13;
  Vec winv = Vec::Zero(w.size());
  int rank = 0;
  for (int i = 0; i < w.size(); ++i) {
    if (w[i] > cut) {
      winv[i] = 1.0 / w[i];
      ++rank;
    }
  }
  if (rank_out) *rank_out = rank;
  return V * winv.asDiagonal() * V.transpose();
}

// -------------------------------------------------------------------------
// Condensed numeric solver: projected gradient on the stacked control vector
// with an augmented-Lagrangian treatment of state-set and second-stage
// constraints. Input boxes are handled by projection.
// -------------------------------------------------------------------------

struct CondensedSpec {
  int horizon = 1;      // number of controls / predicted states
  int cost_stages = 1;  // leading stages that enter the objective
  std::optional<TerminalWeight> lt;
  std::optional<double> tail_bound;  // l(x2, u1) <= bound
};

class CondensedSolver {
 public:
  CondensedSolver(const SystemModel& model, const StageCost& l, const ConstraintSets& sets,
                  Vec x0, CondensedSpec spec, SolveOptions opts)
      : model_(model),
        l_(l),
        sets_(sets),
        x0_(std::move(x0)),
        spec_(std::move(spec)),
        opts_(opts),
        n_(model.state_dim()),
        m_(model.input_dim()),
        dim_(spec_.horizon * model.input_dim()) {
    const bool box = sets_.state.kind == StateSet::Kind::Box;
    if (box) {
      lam_lo_ = Mat::Zero(spec_.horizon, n_);
      lam_hi_ = Mat::Zero(spec_.horizon, n_);
    }
  }

  struct Result {
    SolveStatus status = SolveStatus::Infeasible;
    Vec z;
    std::vector<Vec> xs;  // x(k+1|k)..x(k+H|k)
    double objective = 0.0;
  };

  double objective_at(const Vec& z) const { return objective(rollout(z), z); }
  Vec gradient_at(const Vec& z) const { return gradient(rollout(z), z); }

  Result solve() {
    Vec z = Vec::Zero(dim_);
    double rho = 1e3;
    int doublings = 0;
    double prev_viol = kInf;
    bool stationary = false;

    const double dead = violation_deadband();
    for (int outer = 0; outer < 40; ++outer) {
      stationary = run_pgd(z);
      const auto xs = rollout(z);
      const double v = max_violation(xs, z);
      // Multipliers must settle too: breaking on feasibility alone leaves an
      // overshot lambda biasing the iterate inward by ~lambda/rho.
      const double lam_delta = update_multipliers(xs, z, rho);
      if (v <= dead && lam_delta <= 1e-8 * (1.0 + max_multiplier())) break;
      if (v > 0.25 * prev_viol && doublings < 6) {
        rho *= 2.0;
        ++doublings;
      }
      prev_viol = v;
      rho_ = rho;
    }

    restore_feasibility(z);

    Result res;
    res.z = z;
    auto xs = rollout(z);
    res.xs.assign(xs.begin() + 1, xs.end());
    res.objective = objective(xs, z);
    const double v = max_violation(xs, z);
    if (v > kSetTol) {
      res.status = SolveStatus::Infeasible;
    } else {
      res.status = stationary ? SolveStatus::Optimal : SolveStatus::MaxIter;
    }
    return res;
  }

 private:
  Vec control(const Vec& z, int i) const { return z.segment(i * m_, m_); }

  Vec clamp_box(Vec z) const {
    if (!sets_.input.is_bounded()) return z;
    for (int i = 0; i < spec_.horizon; ++i) {
      for (int c = 0; c < m_; ++c) {
        double& v = z[i * m_ + c];
        v = std::clamp(v, -sets_.input.u_max[c], sets_.input.u_max[c]);
      }
    }
    return z;
  }

  std::vector<Vec> rollout(const Vec& z) const {
    std::vector<Vec> xs(spec_.horizon + 1);
    xs[0] = x0_;
    for (int i = 0; i < spec_.horizon; ++i) xs[i + 1] = model_.step(xs[i], control(z, i));
    return xs;
  }

  double stage_cost(const std::vector<Vec>& xs, const Vec& z, int i) const {
    const Vec u = control(z, i);
    if (spec_.lt && i == spec_.cost_stages - 1) {
      return terminal_stage(l_, *spec_.lt, xs[i + 1], u);
    }
    return l_(xs[i + 1], u);
  }

  double objective(const std::vector<Vec>& xs, const Vec& z) const {
    double f = 0.0;
    for (int i = 0; i < spec_.cost_stages; ++i) f += stage_cost(xs, z, i);
    return f;
  }

  double tail_value(const std::vector<Vec>& xs, const Vec& z) const {
    return l_(xs[2], control(z, 1));
  }

  double max_violation(const std::vector<Vec>& xs, const Vec& z) const {
    double v = 0.0;
    for (int i = 1; i <= spec_.horizon; ++i) v = std::max(v, sets_.state.violation(xs[i]));
    if (spec_.tail_bound) v = std::max(v, tail_value(xs, z) - *spec_.tail_bound);
    return v;
  }

  double augmented(const std::vector<Vec>& xs, const Vec& z) const {
    double f = objective(xs, z);
    const double rho = rho_;
    if (sets_.state.kind == StateSet::Kind::Box) {
      for (int i = 1; i <= spec_.horizon; ++i) {
        for (int c = 0; c < n_; ++c) {
          const double ghi = xs[i][c] - sets_.state.hi[c];
          const double glo = sets_.state.lo[c] - xs[i][c];
          f += al_term(lam_hi_(i - 1, c), ghi, rho);
          f += al_term(lam_lo_(i - 1, c), glo, rho);
        }
      }
    }
    if (spec_.tail_bound) {
      f += al_term(lam_tail_, tail_value(xs, z) - *spec_.tail_bound, rho);
    }
    return f;
  }

  static double al_term(double lam, double g, double rho) {
    const double t = std::max(0.0, lam + rho * g);
    return (t * t - lam * lam) / (2.0 * rho);
  }

  // Gradient of the augmented objective via a reverse sweep. Jacobians are
  // exact for linear models; nonlinear ones use central differences.
  Vec gradient(const std::vector<Vec>& xs, const Vec& z) const {
    const int H = spec_.horizon;
    std::vector<Vec> sx(H + 1, Vec::Zero(n_));
    std::vector<Vec> su(H, Vec::Zero(m_));
    const double rho = rho_;

    for (int i = 0; i < spec_.cost_stages; ++i) {
      add_cost_gradient(xs, z, i, 1.0, sx[i + 1], su[i]);
    }
    if (sets_.state.kind == StateSet::Kind::Box) {
      for (int i = 1; i <= H; ++i) {
        for (int c = 0; c < n_; ++c) {
          const double mu_hi =
              std::max(0.0, lam_hi_(i - 1, c) + rho * (xs[i][c] - sets_.state.hi[c]));
          const double mu_lo =
              std::max(0.0, lam_lo_(i - 1, c) + rho * (sets_.state.lo[c] - xs[i][c]));
          sx[i][c] += mu_hi - mu_lo;
        }
      }
    }
    if (spec_.tail_bound) {
      const double mu =
          std::max(0.0, lam_tail_ + rho * (tail_value(xs, z) - *spec_.tail_bound));
      if (mu > 0.0) add_plain_cost_gradient(xs[2], control(z, 1), mu, sx[2], su[1]);
    }

    Vec grad = Vec::Zero(dim_);
    Vec adj = sx[H];
    for (int i = H - 1; i >= 0; --i) {
      Mat Ai, Bi;
      jacobians(xs[i], control(z, i), Ai, Bi);
      grad.segment(i * m_, m_) = su[i] + Bi.transpose() * adj;
      if (i > 0) adj = sx[i] + Ai.transpose() * adj;
    }
    return grad;
  }

  // d(stage i cost)/d(x_{i+1}), d/d(u_i); weight scales the contribution.
  void add_cost_gradient(const std::vector<Vec>& xs, const Vec& z, int i, double weight,
                         Vec& gx, Vec& gu) const {
    const Vec u = control(z, i);
    if (spec_.lt && i == spec_.cost_stages - 1) {
      gx += weight * 2.0 * (spec_.lt->P * xs[i + 1]);
      gu += weight * 2.0 * (l_.R() * u);
      return;
    }
    add_plain_cost_gradient(xs[i + 1], u, weight, gx, gu);
  }

  void add_plain_cost_gradient(const Vec& xn, const Vec& u, double weight, Vec& gx,
                               Vec& gu) const {
    if (l_.is_quadratic()) {
      gx += weight * 2.0 * (l_.Q() * xn);
      gu += weight * 2.0 * (l_.R() * u);
      return;
    }
    for (int c = 0; c < n_; ++c) {
      const double h = 1e-6 * (1.0 + std::abs(xn[c]));
      Vec xp = xn, xm = xn;
      xp[c] += h;
      xm[c] -= h;
      gx[c] += weight * (l_(xp, u) - l_(xm, u)) / (2.0 * h);
    }
    for (int c = 0; c < m_; ++c) {
      const double h = 1e-6 * (1.0 + std::abs(u[c]));
      Vec up = u, um = u;
      up[c] += h;
      um[c] -= h;
      gu[c] += weight * (l_(xn, up) - l_(xn, um)) / (2.0 * h);
    }
  }

  void jacobians(const Vec& x, const Vec& u, Mat& A, Mat& B) const {
    if (model_.is_linear()) {
      A = model_.A();
      B = model_.B();
      return;
    }
    A.resize(n_, n_);
    B.resize(n_, m_);
    for (int c = 0; c < n_; ++c) {
      const double h = 1e-6 * (1.0 + std::abs(x[c]));
      Vec xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      A.col(c) = (model_.step(xp, u) - model_.step(xm, u)) / (2.0 * h);
    }
    for (int c = 0; c < m_; ++c) {
      const double h = 1e-6 * (1.0 + std::abs(u[c]));
      Vec up = u, um = u;
      up[c] += h;
      um[c] -= h;
      B.col(c) = (model_.step(x, up) - model_.step(x, um)) / (2.0 * h);
    }
  }

  // Monotone projected gradient descent with a Barzilai-Borwein step guess
  // and Armijo backtracking. Returns true when the projected-gradient
  // residual met the stopping tolerance.
  bool run_pgd(Vec& z) {
    z = clamp_box(z);
    auto xs = rollout(z);
    double fz = augmented(xs, z);
    Vec g = gradient(xs, z);
    double t = 1.0;
    for (int iter = 0; iter < opts_.max_iters; ++iter) {
      const Vec unit = clamp_box(z - g);
      const double res = (z - unit).lpNorm<Eigen::Infinity>();
      if (res <= opts_.stat_tol * (1.0 + z.lpNorm<Eigen::Infinity>())) return true;

      double tt = t;
      Vec znew, d;
      double fnew = fz;
      bool moved = false;
      for (int ls = 0; ls < 70; ++ls) {
        znew = clamp_box(z - tt * g);
        d = znew - z;
        if (d.lpNorm<Eigen::Infinity>() == 0.0) break;
        fnew = augmented(rollout(znew), znew);
        if (fnew <= fz + 1e-4 * g.dot(d)) {
          moved = true;
          break;
        }
        tt *= 0.5;
      }
      if (!moved) return true;  // no descent direction left within the box

      auto xs_new = rollout(znew);
      Vec gnew = gradient(xs_new, znew);
      const Vec s = znew - z;
      const Vec y = gnew - g;
      const double sy = s.dot(y);
      t = sy > 1e-16 ? std::clamp(s.dot(s) / sy, 1e-12, 1e12) : tt * 2.0;
      z = znew;
      g = gnew;
      fz = fnew;
    }
    return false;
  }

  // Returns the largest |lambda change| so the outer loop can detect
  // multiplier stationarity. Residuals inside the deadband do not charge the
  // multiplier: the inner solver cannot remove them on degenerate actives
  // (flat quartic valleys), and charging for them biases the iterate by
  // lambda/rho every outer pass. Restoration removes them at the end.
  double update_multipliers(const std::vector<Vec>& xs, const Vec& z, double rho) {
    double delta = 0.0;
    auto bump = [&](double& lam, double g, double scale) {
      const double dead = 1e-8 * scale;
      if (g >= 0.0 && g <= dead) g = 0.0;
      const double next = std::max(0.0, lam + rho * g);
      delta = std::max(delta, std::abs(next - lam));
      lam = next;
    };
    if (sets_.state.kind == StateSet::Kind::Box) {
      for (int i = 1; i <= spec_.horizon; ++i) {
        for (int c = 0; c < n_; ++c) {
          const double scale =
              1.0 + std::max(std::abs(sets_.state.lo[c]), std::abs(sets_.state.hi[c]));
          bump(lam_hi_(i - 1, c), xs[i][c] - sets_.state.hi[c], scale);
          bump(lam_lo_(i - 1, c), sets_.state.lo[c] - xs[i][c], scale);
        }
      }
    }
    if (spec_.tail_bound) {
      bump(lam_tail_, tail_value(xs, z) - *spec_.tail_bound,
           1.0 + std::abs(*spec_.tail_bound));
    }
    return delta;
  }

  double violation_deadband() const {
    double scale = 1.0;
    if (sets_.state.kind == StateSet::Kind::Box) {
      scale = std::max(scale, sets_.state.lo.cwiseAbs().maxCoeff());
      scale = std::max(scale, sets_.state.hi.cwiseAbs().maxCoeff());
    }
    if (spec_.tail_bound) scale = std::max(scale, std::abs(*spec_.tail_bound));
    return 1e-8 * (1.0 + scale);
  }

  double max_multiplier() const {
    double m = lam_tail_;
    if (lam_lo_.size()) m = std::max(m, lam_lo_.maxCoeff());
    if (lam_hi_.size()) m = std::max(m, lam_hi_.maxCoeff());
    return m;
  }

  // Gauss-Newton push of the remaining constraint violations toward zero.
  // Violations at entry are already small, so the objective moves only to
  // second order.
  void restore_feasibility(Vec& z) {
    for (int it = 0; it < 40; ++it) {
      auto xs = rollout(z);
      const auto viol = violation_vector(xs, z);
      double maxv = 0.0;
      for (double v : viol) maxv = std::max(maxv, v);
      if (maxv <= 1e-13) return;

      const int nv = static_cast<int>(viol.size());
      Mat J(nv, dim_);
      const double h = 1e-7 * (1.0 + z.lpNorm<Eigen::Infinity>());
      for (int k = 0; k < dim_; ++k) {
        Vec zp = z, zm = z;
        zp[k] += h;
        zm[k] -= h;
        const auto vp = violation_vector(rollout(zp), zp);
        const auto vm = violation_vector(rollout(zm), zm);
        for (int r = 0; r < nv; ++r) J(r, k) = (vp[r] - vm[r]) / (2.0 * h);
      }
      Vec rhs(nv);
      for (int r = 0; r < nv; ++r) rhs[r] = -viol[r];
      Vec dz = J.completeOrthogonalDecomposition().solve(rhs);
      bool accepted = false;
      for (int bt = 0; bt < 8 && !accepted; ++bt) {
        Vec zt = clamp_box(z + dz);
        const auto vt = violation_vector(rollout(zt), zt);
        double mv = 0.0;
        for (double v : vt) mv = std::max(mv, v);
        if (mv < maxv) {
          z = zt;
          accepted = true;
        } else {
          dz *= 0.5;
        }
      }
      if (!accepted) return;
    }
  }

  // Positive parts of every tracked constraint, fixed layout across calls.
  std::vector<double> violation_vector(const std::vector<Vec>& xs, const Vec& z) const {
    std::vector<double> v;
    if (sets_.state.kind == StateSet::Kind::Box) {
      for (int i = 1; i <= spec_.horizon; ++i) {
        for (int c = 0; c < n_; ++c) {
          v.push_back(std::max(0.0, xs[i][c] - sets_.state.hi[c]));
          v.push_back(std::max(0.0, sets_.state.lo[c] - xs[i][c]));
        }
      }
    }
    if (spec_.tail_bound) {
      v.push_back(std::max(0.0, tail_value(xs, z) - *spec_.tail_bound));
    }
    return v;
  }

  const SystemModel& model_;
  const StageCost& l_;
  const ConstraintSets& sets_;
  Vec x0_;
  CondensedSpec spec_;
  SolveOptions opts_;
  int n_, m_, dim_;
  Mat lam_lo_, lam_hi_;
  double lam_tail_ = 0.0;
  double rho_ = 1e3;
};

// Exact one-step solve for a scalar-input linear-quadratic instance: clamp
// the unconstrained minimizer into the feasible control interval implied by
// the input box and (for a box state set) the successor constraints.
std::optional<OneStepValue> one_step_interval(const SystemModel& model, const Mat& Q,
                                              const Mat& R, const ConstraintSets& sets,
                                              const Vec& x) {
  const Vec ax = model.A() * x;
  const Vec b = model.B().col(0);
  double ulo = -kInf, uhi = kInf;
  if (sets.input.is_bounded()) {
    ulo = -sets.input.u_max[0];
    uhi = sets.input.u_max[0];
  }
  if (sets.state.kind == StateSet::Kind::Box) {
    for (int c = 0; c < ax.size(); ++c) {
      const double lo = sets.state.lo[c] - kSetTol, hi = sets.state.hi[c] + kSetTol;
      if (std::abs(b[c]) < 1e-14) {
        if (ax[c] < lo || ax[c] > hi) return OneStepValue{};  // infeasible
        continue;
      }
      double a1 = (lo - ax[c]) / b[c], a2 = (hi - ax[c]) / b[c];
      if (a1 > a2) std::swap(a1, a2);
      ulo = std::max(ulo, a1);
      uhi = std::min(uhi, a2);
    }
  }
  if (ulo > uhi) return OneStepValue{};  // infeasible

  const double c2 = (b.dot(Q * b)) + R(0, 0);
  const double c1 = 2.0 * b.dot(Q * ax);
  double u;
  if (c2 > 1e-14) {
    u = std::clamp(-c1 / (2.0 * c2), ulo, uhi);
  } else if (std::abs(c1) > 1e-14) {
    u = c1 > 0 ? ulo : uhi;
    if (!std::isfinite(u)) u = 0.0;
  } else {
    u = std::clamp(0.0, ulo, uhi);  // flat: smallest-norm control
  }
  OneStepValue r;
  r.feasible = true;
  r.u_star = Vec::Constant(1, u);
  r.x_next = model.step(x, r.u_star);
  r.m_val = r.x_next.dot(Q * r.x_next) + R(0, 0) * u * u;
  return r;
}

HorizonSolution solution_from_condensed(const CondensedSolver::Result& res, int m) {
  HorizonSolution sol;
  sol.status = res.status;
  sol.x_star = res.xs;
  const int H = static_cast<int>(res.xs.size());
  sol.u_star.reserve(H);
  for (int i = 0; i < H; ++i) sol.u_star.push_back(res.z.segment(i * m, m));
  sol.j_star = res.objective;
  return sol;
}

}  // namespace

LqGainValue lq_gain_and_value(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n) throw ShapeError("A/B dimensions inconsistent");
  if (Q.rows() != n || Q.cols() != n) throw ShapeError("Q must be n x n");
  if (R.rows() != m || R.cols() != m) throw ShapeError("R must be m x m");
  const Mat S = R + B.transpose() * Q * B;
  LqGainValue gv;
  const Mat Sp = pinv_psd(S, &gv.rank);
  const Mat BQA = B.transpose() * Q * A;
  gv.K = -Sp * BQA;
  Mat M = A.transpose() * Q * A - BQA.transpose() * Sp * BQA;
  gv.M = 0.5 * (M + M.transpose());
  return gv;
}

HorizonSolution solve_lq_horizon(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                                 const Vec& x0, int N, const std::optional<Mat>& terminal_P) {
  if (N < 1) throw ArgumentError("horizon must satisfy N >= 1");
  if (x0.size() != A.rows()) throw ShapeError("x0 dimension mismatch");
  std::vector<Mat> gains(N);
  Mat P = Mat::Zero(A.rows(), A.cols());
  for (int i = N - 1; i >= 0; --i) {
    Mat Qs = (terminal_P && i == N - 1) ? *terminal_P : Q;
    Qs += P;
    const LqGainValue gv = lq_gain_and_value(A, B, Qs, R);
    gains[i] = gv.K;
    P = gv.M;
  }
  HorizonSolution sol;
  sol.status = SolveStatus::Optimal;
  Vec x = x0;
  for (int i = 0; i < N; ++i) {
    const Vec u = gains[i] * x;
    x = A * x + B * u;
    sol.u_star.push_back(u);
    sol.x_star.push_back(x);
  }
  // Nonnegative stage costs can round to a hair below zero in the recursion.
  sol.j_star = std::max(0.0, x0.dot(P * x0));
  return sol;
}

OneStepValue one_step_value(const SystemModel& model, const StageCost& l,
                            const ConstraintSets& sets, const Vec& x,
                            const SolveOptions& opts) {
  if (x.size() != model.state_dim()) throw ShapeError("state dimension mismatch");
  if (!sets.state.contains(x)) return OneStepValue{};

  if (model.is_linear() && l.is_quadratic() && !opts.force_numeric) {
    const bool unconstrained =
        !sets.input.is_bounded() && sets.state.kind == StateSet::Kind::AllSpace;
    if (unconstrained) {
      const LqGainValue gv = lq_gain_and_value(model.A(), model.B(), l.Q(), l.R());
      OneStepValue r;
      r.feasible = true;
      r.u_star = gv.K * x;
      r.x_next = model.step(x, r.u_star);
      r.m_val = l(r.x_next, r.u_star);
      return r;
    }
    if (model.input_dim() == 1) {
      if (auto r = one_step_interval(model, l.Q(), l.R(), sets, x)) return *r;
    }
  }

  CondensedSpec spec;
  spec.horizon = 1;
  spec.cost_stages = 1;
  CondensedSolver solver(model, l, sets, x, spec, opts);
  const auto res = solver.solve();
  OneStepValue r;
  if (res.status == SolveStatus::Infeasible) return r;
  r.feasible = true;
  r.u_star = res.z;
  r.x_next = res.xs[0];
  r.m_val = l(r.x_next, r.u_star);
  return r;
}

OneStepValue one_step_value_weighted(const SystemModel& model, const Mat& Qw,
                                     const Mat& Rw, const ConstraintSets& sets,
                                     const Vec& x, const SolveOptions& opts) {
  if (x.size() != model.state_dim()) throw ShapeError("state dimension mismatch");
  if (!sets.state.contains(x)) return OneStepValue{};

  if (model.is_linear() && !opts.force_numeric) {
    const bool unconstrained =
        !sets.input.is_bounded() && sets.state.kind == StateSet::Kind::AllSpace;
    if (unconstrained) {
      const LqGainValue gv = lq_gain_and_value(model.A(), model.B(), Qw, Rw);
      OneStepValue r;
      r.feasible = true;
      r.u_star = gv.K * x;
      r.x_next = model.step(x, r.u_star);
      r.m_val = r.x_next.dot(Qw * r.x_next) + r.u_star.dot(Rw * r.u_star);
      return r;
    }
    if (model.input_dim() == 1) {
      if (auto r = one_step_interval(model, Qw, Rw, sets, x)) return *r;
    }
  }

  const StageCost wrapped = StageCost::evaluable(
      model.state_dim(), model.input_dim(),
      [Qw, Rw](const Vec& xn, const Vec& u) { return xn.dot(Qw * xn) + u.dot(Rw * u); });
  CondensedSpec spec;
  spec.horizon = 1;
  spec.cost_stages = 1;
  CondensedSolver solver(model, wrapped, sets, x, spec, opts);
  const auto res = solver.solve();
  OneStepValue r;
  if (res.status == SolveStatus::Infeasible) return r;
  r.feasible = true;
  r.u_star = res.z;
  r.x_next = res.xs[0];
  r.m_val = r.x_next.dot(Qw * r.x_next) + r.u_star.dot(Rw * r.u_star);
  return r;
}

HorizonSolution solve_horizon(const SystemModel& model, const StageCost& l,
                              const ConstraintSets& sets, const Vec& x0, int N,
                              const std::optional<ExtraConstraint>& extra,
                              const std::optional<TerminalWeight>& lt,
                              const SolveOptions& opts) {
  if (N < 1) throw ArgumentError("horizon must satisfy N >= 1");
  if (x0.size() != model.state_dim()) throw ShapeError("x0 dimension mismatch");
  if (l.state_dim() != model.state_dim() || l.input_dim() != model.input_dim()) {
    throw ShapeError("stage cost dimensions must match the model");
  }
  if (!sets.state.contains(x0)) throw ArgumentError("x0 lies outside the state set");
  if (extra && N < 2) {
    throw ArgumentError("the second-stage constraint requires N >= 2 predicted steps");
  }
  if (lt && !l.is_quadratic()) {
    throw UnsupportedError("terminal weight requires a separable quadratic stage cost");
  }

  const bool unconstrained =
      !sets.input.is_bounded() && sets.state.kind == StateSet::Kind::AllSpace;
  if (model.is_linear() && l.is_quadratic() && unconstrained && !extra &&
      !opts.force_numeric) {
    return solve_lq_horizon(model.A(), model.B(), l.Q(), l.R(), x0, N,
                            lt ? std::optional<Mat>(lt->P) : std::nullopt);
  }
  if (N == 1 && !extra && !lt && model.is_linear() && l.is_quadratic() &&
      model.input_dim() == 1 && !opts.force_numeric) {
    const OneStepValue osv = one_step_value(model, l, sets, x0, opts);
    HorizonSolution sol;
    if (!osv.feasible) return sol;
    sol.status = SolveStatus::Optimal;
    sol.u_star = {osv.u_star};
    sol.x_star = {osv.x_next};
    sol.j_star = osv.m_val;
    return sol;
  }

  CondensedSpec spec;
  spec.horizon = N;
  spec.cost_stages = N;
  spec.lt = lt;
  if (extra) spec.tail_bound = extra->bound;
  CondensedSolver solver(model, l, sets, x0, spec, opts);
  auto res = solver.solve();
  auto sol = solution_from_condensed(res, model.input_dim());
  if (sol.status != SolveStatus::Infeasible) {
    sol.j_star = horizon_cost(l, sol.x_star, sol.u_star, lt);
  }
  return sol;
}

namespace {

// Exact joint solve for the unconstrained linear-quadratic scalar-input case.
// With M the one-step value matrix, the tail constraint reduces to
// x1' M x1 <= bound, a quadratic inequality in u0, so the feasible set is an
// interval and the optimum is the clamped stage minimizer. Penalty iterations
// stall on this problem when the constraint is weakly active, so the algebra
// matters beyond speed.
std::optional<BoundedTailSolution> bounded_tail_closed_form(const SystemModel& model,
                                                            const StageCost& l,
                                                            const Vec& x0, double bound) {
  const Mat& A = model.A();
  const Vec b = model.B().col(0);
  const Mat& Q = l.Q();
  const double r = l.R()(0, 0);
  const LqGainValue gv = lq_gain_and_value(A, model.B(), Q, l.R());

  const Vec ax = A * x0;
  // tail constraint: (ax + b u0)' M (ax + b u0) <= bound
  const double c2 = b.dot(gv.M * b);
  const double c1 = 2.0 * b.dot(gv.M * ax);
  const double c0 = ax.dot(gv.M * ax) - bound;
  double lo = -kInf, hi = kInf;
  if (c2 > 1e-13) {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc < 0.0) {
      // allow a boundary touch within roundoff of the vertex value
      const double vertex = c0 - c1 * c1 / (4.0 * c2);
      if (vertex > 1e-9 * (1.0 + std::abs(bound))) return BoundedTailSolution{};
      lo = hi = -c1 / (2.0 * c2);
    } else {
      const double s = std::sqrt(disc);
      lo = (-c1 - s) / (2.0 * c2);
      hi = (-c1 + s) / (2.0 * c2);
    }
  } else if (std::abs(c1) > 1e-13) {
    if (c1 > 0) {
      hi = -c0 / c1;
    } else {
      lo = -c0 / c1;
    }
  } else if (c0 > 1e-9 * (1.0 + std::abs(bound))) {
    return BoundedTailSolution{};  // constant and violated
  }

  // stage objective: (ax + b u0)' Q (ax + b u0) + r u0^2
  const double d2 = b.dot(Q * b) + r;
  const double d1 = 2.0 * b.dot(Q * ax);
  double u0;
  if (d2 > 1e-13) {
    u0 = std::clamp(-d1 / (2.0 * d2), lo, hi);
  } else if (std::abs(d1) > 1e-13) {
    u0 = d1 > 0 ? lo : hi;
    if (!std::isfinite(u0)) u0 = 0.0;
  } else {
    u0 = std::clamp(0.0, lo, hi);
  }
  if (!std::isfinite(u0)) u0 = std::clamp(0.0, lo, hi);

  BoundedTailSolution out;
  out.status = SolveStatus::Optimal;
  out.u0 = Vec::Constant(1, u0);
  out.x1 = model.step(x0, out.u0);
  out.u_tail = gv.K * out.x1;
  out.x2 = model.step(out.x1, out.u_tail);
  out.j_star = l(out.x1, out.u0);
  out.tail_cost = l(out.x2, out.u_tail);
  return out;
}

// Boxed linear-quadratic scalar-input case. The inner tail value
// m_hat(u0) = min_{u1 admissible} l(x2, u1) is convex in u0 (partial
// minimization of a jointly convex function over a convex section), so its
// sublevel set is an interval whose edges bisection pins to ~1e-15 of the
// admissible range. Exact inner evaluations come from the interval clamp.
std::optional<BoundedTailSolution> bounded_tail_scalar_boxed(const SystemModel& model,
                                                             const StageCost& l,
                                                             const ConstraintSets& sets,
                                                             const Vec& x0, double bound) {
  const Mat& A = model.A();
  const Vec b = model.B().col(0);
  const Mat& Q = l.Q();
  const double r = l.R()(0, 0);
  const Vec ax = A * x0;

  double dlo = -kInf, dhi = kInf;
  if (sets.input.is_bounded()) {
    dlo = -sets.input.u_max[0];
    dhi = sets.input.u_max[0];
  }
  if (sets.state.kind == StateSet::Kind::Box) {
    for (int c = 0; c < ax.size(); ++c) {
      const double lo = sets.state.lo[c] - kSetTol, hi = sets.state.hi[c] + kSetTol;
      if (std::abs(b[c]) < 1e-14) {
        if (ax[c] < lo || ax[c] > hi) return BoundedTailSolution{};
        continue;
      }
      double a1 = (lo - ax[c]) / b[c], a2 = (hi - ax[c]) / b[c];
      if (a1 > a2) std::swap(a1, a2);
      dlo = std::max(dlo, a1);
      dhi = std::min(dhi, a2);
    }
  }
  if (!(dlo <= dhi)) return BoundedTailSolution{};
  if (!std::isfinite(dlo) || !std::isfinite(dhi)) return std::nullopt;  // ALM fallback

  auto inner = [&](double u0) -> OneStepValue {
    const Vec u = Vec::Constant(1, u0);
    const Vec x1 = model.step(x0, u);
    if (auto osv = one_step_interval(model, Q, l.R(), sets, x1)) return *osv;
    return OneStepValue{};
  };
  auto m_hat = [&](double u0) {
    const OneStepValue osv = inner(u0);
    return osv.feasible ? osv.m_val : kInf;
  };
  const double feas_tol = 1e-9 * (1.0 + std::abs(bound));

  // Golden-section over the convex extended-value m_hat locates a feasible
  // point (or certifies there is none at this bound).
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a1 = dlo, b1 = dhi;
  double c1 = b1 - gr * (b1 - a1), d1 = a1 + gr * (b1 - a1);
  double fc = m_hat(c1), fd = m_hat(d1);
  for (int it = 0; it < 120 && (b1 - a1) > 1e-14 * (1.0 + std::abs(b1) + std::abs(a1));
       ++it) {
    if (fc <= fd) {
      b1 = d1;
      d1 = c1;
      fd = fc;
      c1 = b1 - gr * (b1 - a1);
      fc = m_hat(c1);
    } else {
      a1 = c1;
      c1 = d1;
      fc = fd;
      d1 = a1 + gr * (b1 - a1);
      fd = m_hat(d1);
    }
  }
  const double u_min = 0.5 * (a1 + b1);
  if (m_hat(u_min) > bound + feas_tol) return BoundedTailSolution{};

  // Bisect the sublevel edges between the feasible interior point and the
  // domain ends.
  auto feasible_at = [&](double u0) { return m_hat(u0) <= bound + feas_tol; };
  double f_lo = dlo, f_hi = dhi;
  if (!feasible_at(dlo)) {
    double lo = dlo, hi = u_min;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (feasible_at(mid) ? hi : lo) = mid;
    }
    f_lo = hi;
  }
  if (!feasible_at(dhi)) {
    double lo = u_min, hi = dhi;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (feasible_at(mid) ? lo : hi) = mid;
    }
    f_hi = lo;
  }

  const double d2 = b.dot(Q * b) + r;
  const double dc1 = 2.0 * b.dot(Q * ax);
  double u0;
  if (d2 > 1e-13) {
    u0 = std::clamp(-dc1 / (2.0 * d2), f_lo, f_hi);
  } else if (std::abs(dc1) > 1e-13) {
    u0 = dc1 > 0 ? f_lo : f_hi;
  } else {
    u0 = std::clamp(0.0, f_lo, f_hi);
  }

  BoundedTailSolution out;
  out.status = SolveStatus::Optimal;
  out.u0 = Vec::Constant(1, u0);
  out.x1 = model.step(x0, out.u0);
  const OneStepValue tail = inner(u0);
  if (!tail.feasible) return BoundedTailSolution{};
  out.u_tail = tail.u_star;
  out.x2 = tail.x_next;
  out.j_star = l(out.x1, out.u0);
  out.tail_cost = tail.m_val;
  return out;
}

}  // namespace

BoundedTailSolution solve_one_stage_bounded_tail(const SystemModel& model,
                                                 const StageCost& l,
                                                 const ConstraintSets& sets, const Vec& x0,
                                                 double bound, const SolveOptions& opts) {
  if (!sets.state.contains(x0)) throw ArgumentError("x0 lies outside the state set");

  const bool unconstrained =
      !sets.input.is_bounded() && sets.state.kind == StateSet::Kind::AllSpace;
  if (model.is_linear() && l.is_quadratic() && model.input_dim() == 1 &&
      !opts.force_numeric) {
    if (unconstrained) {
      if (auto r = bounded_tail_closed_form(model, l, x0, bound)) return *r;
    } else {
      if (auto r = bounded_tail_scalar_boxed(model, l, sets, x0, bound)) return *r;
    }
  }

  CondensedSpec spec;
  spec.horizon = 2;
  spec.cost_stages = 1;
  spec.tail_bound = bound;
  CondensedSolver solver(model, l, sets, x0, spec, opts);
  const auto res = solver.solve();
  BoundedTailSolution out;
  out.status = res.status;
  if (res.status == SolveStatus::Infeasible) return out;
  const int m = model.input_dim();
  out.u0 = res.z.segment(0, m);
  out.u_tail = res.z.segment(m, m);
  out.x1 = res.xs[0];
  out.x2 = res.xs[1];
  out.j_star = l(out.x1, out.u0);
  out.tail_cost = l(out.x2, out.u_tail);
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force oracle. Exhaustive depth-first search over the control grid
// with lossless pruning (stage costs are nonnegative, so a partial sum that
// already reaches the incumbent closes the whole subtree), optionally
// tightened by the unconstrained LQ cost-to-go, which lower-bounds the
// constrained remainder. A pattern-search polish refines the best leaf.
// ---------------------------------------------------------------------------

namespace {

struct BruteForce {
  const SystemModel& model;
  const StageCost& l;
  const ConstraintSets& sets;
  int N;
  const GridSpec& grid;
  std::vector<Vec> controls;  // enumerated grid points
  std::vector<Mat> lb;        // lb[j]: value matrix for j remaining stages
  Vec glo, ghi;               // per-axis polish bounds
  long long nodes = 0;
  double best = kInf;
  std::vector<Vec> best_u;

  void charge(long long k) {
    nodes += k;
    if (nodes > grid.node_budget) {
      throw BudgetError("brute_force_dp exceeded its node budget");
    }
  }

  double lower_bound(const Vec& x, int remaining) const {
    if (remaining <= 0 || lb.empty()) return 0.0;
    return std::max(0.0, x.dot(lb[remaining] * x));
  }

  void dfs(const Vec& x, int depth, double acc, std::vector<Vec>& cur) {
    charge(static_cast<long long>(controls.size()));
    for (const Vec& u : controls) {
      const Vec xn = model.step(x, u);
      if (!sets.state.contains(xn)) continue;
      const double c = acc + l(xn, u);
      if (c + lower_bound(xn, N - depth - 1) >= best) continue;
      cur[depth] = u;
      if (depth + 1 == N) {
        best = c;
        best_u = cur;
      } else {
        dfs(xn, depth + 1, c, cur);
      }
    }
  }

  // Greedy chain of per-stage minimizers; cheap incumbent for pruning.
  void seed(const Vec& x0) {
    Vec x = x0;
    std::vector<Vec> u_seq;
    double total = 0.0;
    for (int d = 0; d < N; ++d) {
      charge(static_cast<long long>(controls.size()));
      double bestc = kInf;
      const Vec* bestu = nullptr;
      Vec bestx;
      for (const Vec& u : controls) {
        const Vec xn = model.step(x, u);
        if (!sets.state.contains(xn)) continue;
        const double c = l(xn, u);
        if (c < bestc) {
          bestc = c;
          bestu = &u;
          bestx = xn;
        }
      }
      if (!bestu) return;
      u_seq.push_back(*bestu);
      total += bestc;
      x = bestx;
    }
    best = total;
    best_u = u_seq;
  }

  std::pair<bool, double> evaluate(const Vec& x0, const std::vector<Vec>& u_seq) {
    charge(N);
    Vec x = x0;
    double total = 0.0;
    for (int d = 0; d < N; ++d) {
      if (!sets.input.contains(u_seq[d])) return {false, 0.0};
      x = model.step(x, u_seq[d]);
      if (!sets.state.contains(x)) return {false, 0.0};
      total += l(x, u_seq[d]);
    }
    return {true, total};
  }

  void polish(const Vec& x0) {
    if (best_u.empty()) return;
    const int m = model.input_dim();
    std::vector<double> h(m);
    double span = 0.0;
    for (int a = 0; a < m; ++a) {
      h[a] = (ghi[a] - glo[a]) / std::max(1, grid.points - 1);
      span = std::max(span, ghi[a] - glo[a]);
    }
    std::vector<Vec> z = best_u;
    for (int iter = 0; iter < 400; ++iter) {
      bool improved = false;
      for (int d = 0; d < N; ++d) {
        for (int a = 0; a < m; ++a) {
          for (double sgn : {1.0, -1.0}) {
            std::vector<Vec> trial = z;
            trial[d][a] = std::clamp(trial[d][a] + sgn * h[a], glo[a], ghi[a]);
            const auto [feas, J] = evaluate(x0, trial);
            if (feas && J < best) {
              best = J;
              z = trial;
              improved = true;
            }
          }
        }
      }
      if (!improved) {
        double hmax = 0.0;
        for (int a = 0; a < m; ++a) {
          h[a] *= 0.5;
          hmax = std::max(hmax, h[a]);
        }
        if (hmax < 1e-12 * std::max(1.0, span)) break;
      }
    }
    best_u = z;
  }
};

}  // namespace

HorizonSolution brute_force_dp(const SystemModel& model, const StageCost& l,
                               const ConstraintSets& sets, const Vec& x0, int N,
                               const GridSpec& grid) {
  if (N < 1 || N > 4) throw ArgumentError("brute_force_dp supports 1 <= N <= 4");
  const int m = model.input_dim();
  if (m > 2) throw ArgumentError("brute_force_dp supports m <= 2");
  if (grid.u_lo.size() != m || grid.u_hi.size() != m) {
    throw ShapeError("grid bounds must have one entry per input axis");
  }
  if (grid.points < 2) throw ArgumentError("grid needs at least 2 points per axis");
  if (!sets.state.contains(x0)) throw ArgumentError("x0 lies outside the state set");

  BruteForce bf{model, l, sets, N, grid};
  bf.glo = grid.u_lo;
  bf.ghi = grid.u_hi;
  if (sets.input.is_bounded()) {
    for (int a = 0; a < m; ++a) {
      bf.glo[a] = std::max(bf.glo[a], -sets.input.u_max[a]);
      bf.ghi[a] = std::min(bf.ghi[a], sets.input.u_max[a]);
    }
  }
  for (int a = 0; a < m; ++a) {
    if (!(bf.glo[a] <= bf.ghi[a])) throw ArgumentError("empty control grid after clipping");
  }

  // Enumerate grid points (second axis fastest).
  const int P = grid.points;
  if (m == 1) {
    const double du = (bf.ghi[0] - bf.glo[0]) / (P - 1);
    for (int j = 0; j < P; ++j) bf.controls.push_back(Vec::Constant(1, bf.glo[0] + j * du));
  } else {
    const double du0 = (bf.ghi[0] - bf.glo[0]) / (P - 1);
    const double du1 = (bf.ghi[1] - bf.glo[1]) / (P - 1);
    for (int j = 0; j < P; ++j) {
      for (int k = 0; k < P; ++k) {
        Vec u(2);
        u << bf.glo[0] + j * du0, bf.glo[1] + k * du1;
        bf.controls.push_back(u);
      }
    }
  }

  // Unconstrained LQ cost-to-go matrices, derived here on purpose so the
  // oracle stays independent of the solver module's recursion.
  if (model.is_linear() && l.is_quadratic()) {
    const Mat& A = model.A();
    const Mat& B = model.B();
    const Mat& Q = l.Q();
    const Mat& R = l.R();
    bf.lb.resize(N);
    bf.lb[0] = Mat::Zero(A.rows(), A.cols());
    for (int j = 1; j < N; ++j) {
      const Mat Qs = Q + bf.lb[j - 1];
      const Mat S = R + B.transpose() * Qs * B;
      int rank = 0;
      const Mat Sp = pinv_psd(S, &rank);
      const Mat BQA = B.transpose() * Qs * A;
      Mat Pj = A.transpose() * Qs * A - BQA.transpose() * Sp * BQA;
      bf.lb[j] = 0.5 * (Pj + Pj.transpose());
    }
  }

  bf.seed(x0);
  if (grid.polish) bf.polish(x0);  // a strong incumbent makes pruning bite
  std::vector<Vec> cur(N, Vec::Zero(m));
  bf.dfs(x0, 0, 0.0, cur);
  if (grid.polish) bf.polish(x0);

  HorizonSolution sol;
  if (bf.best_u.empty()) return sol;  // infeasible at this resolution
  sol.status = SolveStatus::Optimal;
  sol.u_star = bf.best_u;
  Vec x = x0;
  for (int d = 0; d < N; ++d) {
    x = model.step(x, sol.u_star[d]);
    sol.x_star.push_back(x);
  }
  sol.j_star = bf.best;
  return sol;
}

namespace detail {

double condensed_objective(const SystemModel& model, const StageCost& l, const Vec& x0,
                           int N, const Vec& z) {
  static const ConstraintSets none = ConstraintSets::none();
  CondensedSpec spec;
  spec.horizon = N;
  spec.cost_stages = N;
  CondensedSolver solver(model, l, none, x0, spec, SolveOptions{});
  return solver.objective_at(z);
}

Vec condensed_gradient(const SystemModel& model, const StageCost& l, const Vec& x0, int N,
                       const Vec& z) {
  static const ConstraintSets none = ConstraintSets::none();
  CondensedSpec spec;
  spec.horizon = N;
  spec.cost_stages = N;
  CondensedSolver solver(model, l, none, x0, spec, SolveOptions{});
  return solver.gradient_at(z);
}

}  // namespace detail

}  // namespace mpcs
