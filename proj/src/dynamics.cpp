#include "mpcs/dynamics.hpp"

#include <cmath>

namespace mpcs {

InputBox InputBox::symmetric(Vec bounds) {
  for (int i = 0; i < bounds.size(); ++i) {
    if (!(bounds[i] > 0.0) || !std::isfinite(bounds[i])) {
      throw ArgumentError("input box bounds must be strictly positive and finite");
    }
  }
  InputBox b;
  b.u_max = std::move(bounds);
  return b;
}

bool InputBox::contains(const Vec& u, double tol) const {
  if (!is_bounded()) return true;
  if (u.size() != u_max.size()) throw ShapeError("input dimension mismatch");
  return (u.array().abs() <= u_max.array() + tol).all();
}

Vec InputBox::clamp(const Vec& u) const {
  if (!is_bounded()) return u;
  if (u.size() != u_max.size()) throw ShapeError("input dimension mismatch");
  return u.cwiseMax(-u_max).cwiseMin(u_max);
}

StateSet StateSet::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw ShapeError("state box bounds dimension mismatch");
  for (int i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i])) throw ArgumentError("state box must satisfy lo < hi componentwise");
    if (lo[i] > 0.0 || hi[i] < 0.0) throw ArgumentError("state set must contain the origin");
  }
  StateSet s;
  s.kind = Kind::Box;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  return s;
}

bool StateSet::contains(const Vec& x, double tol) const {
  if (kind == Kind::AllSpace) return true;
  if (x.size() != lo.size()) throw ShapeError("state dimension mismatch");
  return (x.array() >= lo.array() - tol).all() && (x.array() <= hi.array() + tol).all();
}

double StateSet::violation(const Vec& x) const {
  if (kind == Kind::AllSpace) return 0.0;
  if (x.size() != lo.size()) throw ShapeError("state dimension mismatch");
  double v = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    v = std::max(v, lo[i] - x[i]);
    v = std::max(v, x[i] - hi[i]);
  }
  return std::max(v, 0.0);
}

SystemModel SystemModel::linear(Mat A, Mat B) {
  if (A.rows() != A.cols()) throw ShapeError("A must be square");
  if (B.rows() != A.rows()) throw ShapeError("B row count must match A");
  if (A.rows() < 1 || B.cols() < 1) throw ShapeError("need n >= 1 and m >= 1");
  SystemModel mdl;
  mdl.linear_ = true;
  mdl.n_ = static_cast<int>(A.rows());
  mdl.m_ = static_cast<int>(B.cols());
  mdl.A_ = std::move(A);
  mdl.B_ = std::move(B);
  return mdl;
}

SystemModel SystemModel::nonlinear(int state_dim, int input_dim, TransitionFn f,
                                   StateSet state_domain, InputBox input_domain) {
  if (state_dim < 1 || input_dim < 1) throw ShapeError("need n >= 1 and m >= 1");
  if (!f) throw ArgumentError("transition map must be callable");
  SystemModel mdl;
  mdl.linear_ = false;
  mdl.n_ = state_dim;
  mdl.m_ = input_dim;
  mdl.f_ = std::move(f);
  mdl.x_domain_ = std::move(state_domain);
  mdl.u_domain_ = std::move(input_domain);
  // f(0,0) = 0 is assumed by every stability result downstream.
  Vec f0 = mdl.f_(Vec::Zero(state_dim), Vec::Zero(input_dim));
  if (f0.size() != state_dim || f0.norm() > 1e-12) {
    throw ArgumentError("transition map must satisfy f(0,0) = 0");
  }
  return mdl;
}

const Mat& SystemModel::A() const {
  if (!linear_) throw ArgumentError("A() requires a linear model");
  return A_;
}

const Mat& SystemModel::B() const {
  if (!linear_) throw ArgumentError("B() requires a linear model");
  return B_;
}

Vec SystemModel::step(const Vec& x, const Vec& u) const {
  if (x.size() != n_) throw ShapeError("state dimension mismatch in step()");
  if (u.size() != m_) throw ShapeError("input dimension mismatch in step()");
  if (linear_) return A_ * x + B_ * u;
  if (!x_domain_.contains(x, kSetTol) || !u_domain_.contains(u, kSetTol)) {
    throw DomainError("propagation outside the stated model domain");
  }
  return f_(x, u);
}

}  // namespace mpcs
