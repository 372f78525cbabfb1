#include "mpcs/stability.hpp"

#include <Eigen/Eigenvalues>

#include <cfloat>
#include <cmath>
#include <sstream>

namespace mpcs {

namespace {

Certificate finish(Certificate c) {
  c.margin = c.rhs - c.lhs;
  c.verdict = c.margin >= -kCertTol;
  return c;
}

Certificate infeasible_certificate(CertKind kind) {
  Certificate c;
  c.kind = kind;
  c.lhs = DBL_MAX;
  c.rhs = 0.0;
  c.margin = -DBL_MAX;
  c.verdict = false;
  c.infeasible = true;
  return c;
}

}  // namespace

std::string to_string(CertKind kind) {
  switch (kind) {
    case CertKind::Thm1: return "thm1";
    case CertKind::Thm2: return "thm2";
    case CertKind::ThmTw: return "thm_tw";
    case CertKind::Classic: return "classic";
    case CertKind::LqN1: return "lq_n1";
  }
  return "unknown";
}

std::string Certificate::csv_row() const {
  std::ostringstream os;
  os.precision(10);
  os << to_string(kind) << ',' << k << ',' << lhs << ',' << rhs << ',' << margin << ','
     << (verdict ? 1 : 0);
  return os.str();
}

Certificate check_thm1(const HorizonSolution& sol, const SystemModel& model,
                       const StageCost& l, const ConstraintSets& sets) {
  if (!sol.optimal()) throw ArgumentError("check_thm1 requires an optimal solution");
  const Vec& x_terminal = sol.x_star.back();
  const OneStepValue tail = one_step_value(model, l, sets, x_terminal);
  if (!tail.feasible) return infeasible_certificate(CertKind::Thm1);
  Certificate c;
  c.kind = CertKind::Thm1;
  c.lhs = tail.m_val;
  c.rhs = l(sol.x_star.front(), sol.u_star.front());
  return finish(std::move(c));
}

Certificate check_thm2(const Vec& x_now, const HorizonSolution& sol,
                       const SystemModel& model, const StageCost& l,
                       const ConstraintSets& sets) {
  if (!sol.optimal()) throw ArgumentError("check_thm2 requires an optimal solution");
  const OneStepValue at_terminal = one_step_value(model, l, sets, sol.x_star.back());
  if (!at_terminal.feasible) return infeasible_certificate(CertKind::Thm2);
  const OneStepValue at_now = one_step_value(model, l, sets, x_now);
  if (!at_now.feasible) return infeasible_certificate(CertKind::Thm2);
  Certificate c;
  c.kind = CertKind::Thm2;
  c.lhs = at_terminal.m_val;
  c.rhs = at_now.m_val;
  c.state = x_now;
  return finish(std::move(c));
}

Certificate check_thm_tw(const HorizonSolution& sol_tw, const SystemModel& model,
                         const StageCost& l, const TerminalWeight& lt,
                         const ConstraintSets& sets) {
  if (!sol_tw.optimal()) throw ArgumentError("check_thm_tw requires an optimal solution");
  const int N = static_cast<int>(sol_tw.u_star.size());
  if (N < 2) {
    throw ArgumentError(
        "check_thm_tw requires N >= 2: at N = 1 the condition's control indices collide");
  }
  const Vec& x_terminal = sol_tw.x_star.back();
  const Vec& u_last = sol_tw.u_star.back();

  // Tail control u(k+N|k): minimize l_T(f(x*_N, u), u) over the admissible
  // inputs. The terminal weight may be singular, so use the weighted solve.
  const OneStepValue tail =
      one_step_value_weighted(model, lt.P, l.R(), sets, x_terminal);
  if (!tail.feasible) return infeasible_certificate(CertKind::ThmTw);

  Certificate c;
  c.kind = CertKind::ThmTw;
  c.lhs = l(x_terminal, u_last) + tail.m_val;
  c.rhs = l(sol_tw.x_star.front(), sol_tw.u_star.front()) +
          terminal_stage(l, lt, x_terminal, u_last);
  return finish(std::move(c));
}

Certificate check_classic(const SystemModel& model, const StageCost& l_orig,
                          const TerminalWeight& p, const ConstraintSets& sets,
                          const Vec& x_terminal, const Vec& u_terminal) {
  if (!sets.input.contains(u_terminal)) {
    throw ArgumentError("check_classic requires u_terminal inside the input box");
  }
  const Vec x_next = model.step(x_terminal, u_terminal);
  Certificate c;
  c.kind = CertKind::Classic;
  c.lhs = p(x_next) + l_orig(x_terminal, u_terminal);
  c.rhs = p(x_terminal);
  c.state = x_terminal;
  return finish(std::move(c));
}

FirstOrderRegion first_order_region(double a, double b, double q, double r) {
  if (!(q > 0.0)) throw ArgumentError("first_order_region requires q > 0");
  if (r < 0.0) throw ArgumentError("first_order_region requires r >= 0");
  if (b == 0.0 && r == 0.0) {
    throw ArgumentError("degenerate first-order instance: b = 0 and r = 0");
  }
  FirstOrderRegion out;
  out.closed_loop_pole = a * r / (r + b * b * q);
  out.new_condition = std::abs(out.closed_loop_pole) < 1.0;
  out.prior_condition = a * a * r / (r + b * b * q) < 1.0;
  return out;
}

Certificate lq_n1_certificate(const Mat& A, const Mat& B, const Mat& Q) {
  const LqGainValue gv = lq_gain_and_value(A, B, Q, Mat::Zero(B.cols(), B.cols()));
  const Mat G = A + B * gv.K;
  const Mat D = G.transpose() * gv.M * G - gv.M;

  Eigen::SelfAdjointEigenSolver<Mat> es(gv.M);
  const Vec w = es.eigenvalues();
  const double wmax = std::max(0.0, w.maxCoeff());
  const double cut = std::max(wmax, 1.0) * 1e-12;
  std::vector<int> idx;
  for (int i = 0; i < w.size(); ++i) {
    if (w[i] > cut) idx.push_back(i);
  }
  Certificate c;
  c.kind = CertKind::LqN1;
  c.rhs = 0.0;
  if (idx.empty()) {
    c.lhs = 0.0;  // M = 0: the condition is vacuous
    return finish(std::move(c));
  }
  Mat basis(A.rows(), static_cast<int>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) basis.col(j) = es.eigenvectors().col(idx[j]);
  Eigen::SelfAdjointEigenSolver<Mat> res(basis.transpose() * D * basis);
  c.lhs = res.eigenvalues().maxCoeff();
  return finish(std::move(c));
}

}  // namespace mpcs
