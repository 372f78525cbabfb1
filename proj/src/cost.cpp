#include "mpcs/cost.hpp"

#include <Eigen/Eigenvalues>

namespace mpcs {

namespace {

void require_symmetric(const Mat& M, const char* name) {
  if (M.rows() != M.cols()) throw ShapeError(std::string(name) + " must be square");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M.cwiseAbs().maxCoeff())) {
    throw ConfigError(std::string(name) + " must be symmetric");
  }
}

double min_eig(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  return es.eigenvalues().minCoeff();
}

}  // namespace

StageCost StageCost::quadratic(Mat Q, Mat R) {
  require_symmetric(Q, "Q");
  require_symmetric(R, "R");
  const double qmin = min_eig(Q);
  if (qmin <= 0.0) {
    // Q > 0 backs the class-K lower bound l(x, 0) >= lambda_min(Q) ||x||^2
    // that the certificates rely on.
    throw ConfigError("state weight Q must be positive definite");
  }
  if (min_eig(R) < -1e-12) throw ConfigError("control weight R must be PSD");
  StageCost c;
  c.quadratic_ = true;
  c.n_ = static_cast<int>(Q.rows());
  c.m_ = static_cast<int>(R.rows());
  c.Q_ = std::move(Q);
  c.R_ = std::move(R);
  c.q_min_eig_ = qmin;
  return c;
}

StageCost StageCost::evaluable(int state_dim, int input_dim, CostFn fn) {
  if (state_dim < 1 || input_dim < 1) throw ShapeError("need n >= 1 and m >= 1");
  if (!fn) throw ArgumentError("cost callable required");
  if (std::abs(fn(Vec::Zero(state_dim), Vec::Zero(input_dim))) > 1e-12) {
    throw ArgumentError("stage cost must satisfy l(0,0) = 0");
  }
  StageCost c;
  c.quadratic_ = false;
  c.n_ = state_dim;
  c.m_ = input_dim;
  c.fn_ = std::move(fn);
  return c;
}

const Mat& StageCost::Q() const {
  if (!quadratic_) throw ArgumentError("Q() requires a quadratic stage cost");
  return Q_;
}

const Mat& StageCost::R() const {
  if (!quadratic_) throw ArgumentError("R() requires a quadratic stage cost");
  return R_;
}

double StageCost::operator()(const Vec& x_next, const Vec& u) const {
  if (x_next.size() != n_) throw ShapeError("state dimension mismatch in stage cost");
  if (u.size() != m_) throw ShapeError("input dimension mismatch in stage cost");
  if (quadratic_) return x_next.dot(Q_ * x_next) + u.dot(R_ * u);
  return fn_(x_next, u);
}

TerminalWeight TerminalWeight::quadratic(Mat P) {
  require_symmetric(P, "P");
  if (min_eig(P) < -1e-12) throw ConfigError("terminal weight P must be PSD");
  return TerminalWeight{std::move(P)};
}

double TerminalWeight::operator()(const Vec& x) const {
  if (x.size() != P.rows()) throw ShapeError("state dimension mismatch in terminal weight");
  return x.dot(P * x);
}

double stage(const StageCost& l, const Vec& x_next, const Vec& u) { return l(x_next, u); }

double terminal_stage(const StageCost& l, const TerminalWeight& lt, const Vec& x_N,
                      const Vec& u_last) {
  if (!l.is_quadratic()) {
    throw UnsupportedError("terminal weight requires a separable quadratic stage cost");
  }
  return lt(x_N) + u_last.dot(l.R() * u_last);
}

StageCost shift_from_original(const Mat& q_weight, const Mat& r_weight) {
  return StageCost::quadratic(q_weight, r_weight);
}

double horizon_cost(const StageCost& l, const std::vector<Vec>& x_pred,
                    const std::vector<Vec>& u_seq, const std::optional<TerminalWeight>& lt) {
  if (x_pred.size() != u_seq.size() || x_pred.empty()) {
    throw ShapeError("predicted state and control sequences must share length N >= 1");
  }
  const size_t N = x_pred.size();
  double total = 0.0;
  for (size_t i = 0; i + 1 < N; ++i) total += l(x_pred[i], u_seq[i]);
  if (lt) {
    total += terminal_stage(l, *lt, x_pred[N - 1], u_seq[N - 1]);
  } else {
    total += l(x_pred[N - 1], u_seq[N - 1]);
  }
  return total;
}

}  // namespace mpcs
