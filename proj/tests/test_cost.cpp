#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mpcs/cost.hpp"
#include "mpcs/dynamics.hpp"

using namespace mpcs;

TEST_CASE("separable quadratic stage cost") {
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  Vec xn(2), u(1);
  xn << 0.8, 1.4;
  u << 0.0;
  CHECK(stage(l, xn, u) == doctest::Approx(2.60).epsilon(1e-12));
  CHECK(stage(l, Vec::Zero(2), Vec::Zero(1)) == 0.0);

  const StageCost scalar = StageCost::quadratic(Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0));
  CHECK(stage(scalar, Vec::Constant(1, 2.0), Vec::Constant(1, 3.0)) == doctest::Approx(13.0));

  CHECK_THROWS_AS(stage(l, Vec::Zero(3), Vec::Zero(1)), ShapeError);
  CHECK_THROWS_AS(stage(l, Vec::Zero(2), Vec::Zero(2)), ShapeError);
}

TEST_CASE("weight validation") {
  Mat Qbad = Mat::Zero(2, 2);  // PSD but not PD
  CHECK_THROWS_AS(StageCost::quadratic(Qbad, Mat::Zero(1, 1)), ConfigError);
  Mat Qneg = -Mat::Identity(2, 2);
  CHECK_THROWS_AS(StageCost::quadratic(Qneg, Mat::Zero(1, 1)), ConfigError);
  Mat Rneg = -Mat::Identity(1, 1);
  CHECK_THROWS_AS(StageCost::quadratic(Mat::Identity(2, 2), Rneg), ConfigError);
  Mat Qasym(2, 2);
  Qasym << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(StageCost::quadratic(Qasym, Mat::Zero(1, 1)), ConfigError);
  // R = 0 is allowed.
  CHECK_NOTHROW(StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1)));
  CHECK(StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1)).min_state_eigenvalue() ==
        doctest::Approx(1.0));
}

TEST_CASE("shift_from_original keeps the separable weights") {
  const StageCost a = shift_from_original(Mat::Identity(2, 2), Mat::Zero(1, 1));
  CHECK(a.Q() == Mat::Identity(2, 2));
  CHECK(a.R() == Mat::Zero(1, 1));

  Mat Qd = Mat::Zero(2, 2);
  Qd(0, 0) = 1.0;
  Qd(1, 1) = 0.25;
  const StageCost b = shift_from_original(Qd, Mat::Zero(1, 1));
  CHECK(b.Q() == Qd);

  const StageCost c =
      shift_from_original(Mat::Constant(1, 1, 2.0), Mat::Constant(1, 1, 3.0));
  CHECK(c.Q()(0, 0) == 2.0);
  CHECK(c.R()(0, 0) == 3.0);
}

TEST_CASE("horizon cost sums shifted stages") {
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  Vec x1(2), u0(1);
  x1 << 0.8, 1.4;
  u0 << 0.3;
  CHECK(horizon_cost(l, {x1}, {u0}) == doctest::Approx(stage(l, x1, u0)));

  Vec xa(2), xb(2);
  xa << 1.0, 0.0;
  xb << 0.5, 0.0;
  CHECK(horizon_cost(l, {xa, xb}, {Vec::Zero(1), Vec::Zero(1)}) == doctest::Approx(1.25));

  const TerminalWeight lt = TerminalWeight::quadratic(2.0 * Mat::Identity(2, 2));
  CHECK(horizon_cost(l, {xa}, {Vec::Zero(1)}, lt) == doctest::Approx(2.0));

  CHECK_THROWS_AS(horizon_cost(l, {xa, xb}, {Vec::Zero(1)}), ShapeError);
  CHECK_THROWS_AS(horizon_cost(l, {}, {}), ShapeError);
}

TEST_CASE("horizon cost is additive over concatenated segments") {
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Constant(1, 1, 0.5));
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  for (int t = 0; t < 25; ++t) {
    std::vector<Vec> xs, us;
    for (int i = 0; i < 6; ++i) {
      Vec x(2), u(1);
      x << d(rng), d(rng);
      u << d(rng);
      xs.push_back(x);
      us.push_back(u);
    }
    const double whole = horizon_cost(l, xs, us);
    const double left = horizon_cost(l, {xs.begin(), xs.begin() + 3}, {us.begin(), us.begin() + 3});
    const double right = horizon_cost(l, {xs.begin() + 3, xs.end()}, {us.begin() + 3, us.end()});
    CHECK(whole == doctest::Approx(left + right).epsilon(1e-12));
  }
}

// Minimizing the original-form sum and the shifted-form sum over the same
// admissible set yields the same argmin controls: the two objectives differ
// by the constant q(x(k)) plus a final-input term minimized at zero.
TEST_CASE("original and shifted objectives share their argmin") {
  const double a = 1.3, b = 1.0, q = 1.0, r = 0.5;
  const double x0 = 1.7;
  const int grid = 41;
  const double span = 3.0;
  auto u_at = [&](int i) { return -span + 2.0 * span * i / (grid - 1); };

  // N = 2: shifted objective over (u0, u1); original adds q x0^2 and r u2^2.
  double best_shift = 1e300, best_orig = 1e300;
  int arg_shift[2] = {-1, -1}, arg_orig[3] = {-1, -1, -1};
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double u0 = u_at(i), u1 = u_at(j);
      const double x1 = a * x0 + b * u0;
      const double x2 = a * x1 + b * u1;
      const double js = q * x1 * x1 + r * u0 * u0 + q * x2 * x2 + r * u1 * u1;
      if (js < best_shift) {
        best_shift = js;
        arg_shift[0] = i;
        arg_shift[1] = j;
      }
      for (int k = 0; k < grid; ++k) {
        const double u2 = u_at(k);
        const double jo = q * x0 * x0 + js + r * u2 * u2;
        if (jo < best_orig) {
          best_orig = jo;
          arg_orig[0] = i;
          arg_orig[1] = j;
          arg_orig[2] = k;
        }
      }
    }
  }
  CHECK(arg_orig[0] == arg_shift[0]);
  CHECK(arg_orig[1] == arg_shift[1]);
  CHECK(u_at(arg_orig[2]) == doctest::Approx(0.0).epsilon(1e-12));  // u*(k+N) = 0
  CHECK(best_orig == doctest::Approx(best_shift + q * x0 * x0).epsilon(1e-12));
}

TEST_CASE("evaluable cost wraps a callable") {
  const StageCost l = StageCost::evaluable(
      1, 1, [](const Vec& x, const Vec& u) { return std::abs(x[0]) + u[0] * u[0]; });
  CHECK(l(Vec::Constant(1, -2.0), Vec::Constant(1, 3.0)) == doctest::Approx(11.0));
  CHECK_THROWS_AS(StageCost::evaluable(
                      1, 1, [](const Vec&, const Vec&) { return 1.0; }),
                  ArgumentError);  // l(0,0) != 0
}

TEST_CASE("terminal weight validation") {
  CHECK_NOTHROW(TerminalWeight::quadratic(Mat::Zero(2, 2)));  // PSD, p(0)=0
  CHECK_THROWS_AS(TerminalWeight::quadratic(-Mat::Identity(2, 2)), ConfigError);
  const TerminalWeight p = TerminalWeight::quadratic(2.0 * Mat::Identity(2, 2));
  Vec x(2);
  x << 1.0, 0.0;
  CHECK(p(x) == doctest::Approx(2.0));
}
