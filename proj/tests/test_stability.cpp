#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mpcs/stability.hpp"

using namespace mpcs;

namespace {

SystemModel agent() {
  Mat A(2, 2), B(2, 1);
  A << 0.7, 0.1, 0.8, 0.6;
  B << 0.8, -0.5;
  return SystemModel::linear(A, B);
}

Mat reweighted_Q() {
  Mat Q = Mat::Zero(2, 2);
  Q(0, 0) = 1.0;
  Q(1, 1) = 0.25;
  return Q;
}

SystemModel scalar_model(double a, double b) {
  return SystemModel::linear(Mat::Constant(1, 1, a), Mat::Constant(1, 1, b));
}

StageCost scalar_cost(double q, double r) {
  return StageCost::quadratic(Mat::Constant(1, 1, q), Mat::Constant(1, 1, r));
}

}  // namespace

TEST_CASE("thm1: reweighted agent passes, distance cost fails") {
  const SystemModel m = agent();
  const ConstraintSets sets = ConstraintSets::none();
  Vec x0(2);
  x0 << 1.0, 1.0;

  const StageCost good = StageCost::quadratic(reweighted_Q(), Mat::Zero(1, 1));
  const Certificate ok = check_thm1(solve_horizon(m, good, sets, x0, 1), m, good, sets);
  CHECK(ok.verdict);
  CHECK(!ok.infeasible);

  const StageCost bad = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  const Certificate fail = check_thm1(solve_horizon(m, bad, sets, x0, 1), m, bad, sets);
  CHECK(!fail.verdict);
  CHECK(fail.margin < -kCertTol);
}

TEST_CASE("thm1: trivial at the origin") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  const ConstraintSets sets = ConstraintSets::none();
  const Certificate c = check_thm1(solve_horizon(m, l, sets, Vec::Zero(2), 1), m, l, sets);
  CHECK(c.lhs == 0.0);
  CHECK(c.rhs == 0.0);
  CHECK(c.verdict);
}

TEST_CASE("thm2: terminal-set membership margins") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  const ConstraintSets sets = ConstraintSets::none();

  const Certificate at0 = check_thm2(Vec::Zero(2), solve_horizon(m, l, sets, Vec::Zero(2), 2),
                                     m, l, sets);
  CHECK(at0.lhs == 0.0);
  CHECK(at0.rhs == 0.0);
  CHECK(at0.verdict);

  // N=2 margin equals the quadratic form 0.4149 x1^2 + 0.4443 x1 x2 + 0.1189 x2^2
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int t = 0; t < 30; ++t) {
    Vec x(2);
    x << d(rng), d(rng);
    const Certificate c = check_thm2(x, solve_horizon(m, l, sets, x, 2), m, l, sets);
    const double form = 0.414936434179726 * x[0] * x[0] +
                        0.444275373970211 * x[0] * x[1] +
                        0.118922196062733 * x[1] * x[1];
    CHECK(c.margin == doctest::Approx(form).epsilon(1e-6));
    CHECK(c.verdict);
  }
}

TEST_CASE("thm2: scalar margin identity M (1 - pole^2) x^2") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(0.2, 2.5);
  for (int t = 0; t < 20; ++t) {
    const double a = d(rng), b = d(rng), q = d(rng), r = d(rng);
    const SystemModel m = scalar_model(a, b);
    const StageCost l = scalar_cost(q, r);
    const ConstraintSets sets = ConstraintSets::none();
    const double x0 = d(rng);
    const Certificate c =
        check_thm2(Vec::Constant(1, x0), solve_horizon(m, l, sets, Vec::Constant(1, x0), 1),
                   m, l, sets);
    const double M = a * a * q * r / (r + b * b * q);
    const double pole = a * r / (r + b * b * q);
    CHECK(c.margin == doctest::Approx(M * (1 - pole * pole) * x0 * x0).epsilon(1e-9));
  }
}

TEST_CASE("thm1 reports infeasibility at the terminal state") {
  // terminal state escapes the region where any control can hold the box
  const SystemModel m = scalar_model(4.0, 1.0);
  const StageCost l = scalar_cost(1.0, 0.0);
  ConstraintSets sets;
  sets.input = InputBox::symmetric(Vec::Constant(1, 0.5));
  sets.state = StateSet::box(Vec::Constant(1, -2.0), Vec::Constant(1, 2.0));
  // from x0=0.5 with u in [-0.5, 0.5]: x1 in [1.5, 2.5] clipped by X to [1.5, 2]
  const HorizonSolution sol = solve_horizon(m, l, sets, Vec::Constant(1, 0.5), 1);
  REQUIRE(sol.optimal());
  const Certificate c = check_thm1(sol, m, l, sets);
  CHECK(c.infeasible);
  CHECK(!c.verdict);
}

TEST_CASE("check_classic: hand-computed scalars") {
  const ConstraintSets sets = ConstraintSets::none();
  {
    // a=0.5, b=1, q=1, r=0, p=2x^2, u=0: p(x+)-p(x)+l' = -0.5 x^2
    const SystemModel m = scalar_model(0.5, 1.0);
    const StageCost lorig = scalar_cost(1.0, 0.0);
    const TerminalWeight p = TerminalWeight::quadratic(Mat::Constant(1, 1, 2.0));
    const Certificate c =
        check_classic(m, lorig, p, sets, Vec::Constant(1, 1.3), Vec::Zero(1));
    CHECK(c.margin == doctest::Approx(0.5 * 1.3 * 1.3).epsilon(1e-12));
    CHECK(c.verdict);
  }
  {
    const SystemModel m = scalar_model(0.5, 1.0);
    const StageCost lorig = scalar_cost(1.0, 0.0);
    const TerminalWeight p = TerminalWeight::quadratic(Mat::Constant(1, 1, 2.0));
    const Certificate c = check_classic(m, lorig, p, sets, Vec::Zero(1), Vec::Zero(1));
    CHECK(c.margin == 0.0);
    CHECK(c.verdict);
  }
  {
    // a=2, b=0 (uncontrollable), p=x^2, q=1: 4x^2 - x^2 + x^2 = 4x^2 > 0
    const SystemModel m = scalar_model(2.0, 0.0);
    const StageCost lorig = scalar_cost(1.0, 0.0);
    const TerminalWeight p = TerminalWeight::quadratic(Mat::Constant(1, 1, 1.0));
    const Certificate c =
        check_classic(m, lorig, p, sets, Vec::Constant(1, 1.0), Vec::Zero(1));
    CHECK(c.margin == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(!c.verdict);
  }
}

TEST_CASE("first-order region arithmetic") {
  {
    const FirstOrderRegion r = first_order_region(2, 1, 1, 1);
    CHECK(r.closed_loop_pole == doctest::Approx(1.0));
    CHECK(!r.new_condition);  // boundary
    CHECK(!r.prior_condition);
  }
  {
    const FirstOrderRegion r = first_order_region(0.9, 1, 1, 1);
    CHECK(r.closed_loop_pole == doctest::Approx(0.45));
    CHECK(r.new_condition);
    CHECK(r.prior_condition);
  }
  {
    const FirstOrderRegion r = first_order_region(3, 1, 4, 1);
    CHECK(r.closed_loop_pole == doctest::Approx(0.6));
    CHECK(r.new_condition);
    CHECK(!r.prior_condition);  // the conservativeness gap
  }
  {
    const FirstOrderRegion r = first_order_region(1.0, 1.0, 1.0, 0.0);
    CHECK(r.closed_loop_pole == 0.0);  // deadbeat
    CHECK(r.new_condition);
  }
  CHECK_THROWS_AS(first_order_region(1, 0, 1, 0), ArgumentError);
  CHECK_THROWS_AS(first_order_region(1, 1, 0, 1), ArgumentError);
  CHECK_THROWS_AS(first_order_region(1, 1, 1, -0.5), ArgumentError);

  // identity: the new condition is exactly |pole| < 1
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(0.1, 4.0);
  for (int t = 0; t < 200; ++t) {
    const FirstOrderRegion r =
        first_order_region(d(rng) - 2.0, d(rng), d(rng), d(rng) - 0.1 > 0 ? d(rng) : 0.0);
    CHECK(r.new_condition == (std::abs(r.closed_loop_pole) < 1.0));
  }
}

TEST_CASE("lq_n1_certificate on the agent weights") {
  const SystemModel m = agent();
  const Certificate good = lq_n1_certificate(m.A(), m.B(), reweighted_Q());
  CHECK(good.verdict);
  CHECK(good.margin == doctest::Approx(0.175931510087).epsilon(1e-8));

  const Certificate bad = lq_n1_certificate(m.A(), m.B(), Mat::Identity(2, 2));
  CHECK(!bad.verdict);
  CHECK(bad.margin == doctest::Approx(-0.09383862411).epsilon(1e-8));

  // A = 0: M = 0 and the condition is vacuous
  const Certificate trivial = lq_n1_certificate(Mat::Zero(2, 2), m.B(), Mat::Identity(2, 2));
  CHECK(trivial.verdict);
}

TEST_CASE("thm_tw reduces to thm1 when the terminal weight equals the state weight") {
  const SystemModel m = agent();
  const ConstraintSets sets = ConstraintSets::none();
  const StageCost l = StageCost::quadratic(reweighted_Q(), Mat::Zero(1, 1));
  const TerminalWeight lt = TerminalWeight::quadratic(reweighted_Q());
  Vec x0(2);
  x0 << 0.8, -0.4;
  // with p = q the weighted objective coincides with the plain one
  const HorizonSolution sol = solve_horizon(m, l, sets, x0, 2, std::nullopt, lt);
  REQUIRE(sol.optimal());
  const Certificate tw = check_thm_tw(sol, m, l, lt, sets);
  const HorizonSolution plain = solve_horizon(m, l, sets, x0, 2);
  const Certificate t1 = check_thm1(plain, m, l, sets);
  CHECK(tw.margin == doctest::Approx(t1.margin).epsilon(1e-9));
  CHECK(tw.verdict == t1.verdict);
}

TEST_CASE("thm_tw trivial at the origin and rejects N = 1") {
  const SystemModel m = agent();
  const ConstraintSets sets = ConstraintSets::none();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  const TerminalWeight lt = TerminalWeight::quadratic(Mat::Identity(2, 2));
  const HorizonSolution sol0 =
      solve_horizon(m, l, sets, Vec::Zero(2), 2, std::nullopt, lt);
  const Certificate c = check_thm_tw(sol0, m, l, lt, sets);
  CHECK(c.margin == doctest::Approx(0.0));
  CHECK(c.verdict);

  const HorizonSolution sol1 =
      solve_horizon(m, l, sets, Vec::Zero(2), 1, std::nullopt, lt);
  CHECK_THROWS_AS(check_thm_tw(sol1, m, l, lt, sets), ArgumentError);
}

TEST_CASE("classic descent implies the terminal-weighted condition") {
  // scalar instance constructed so the classic condition holds at the
  // one-step-optimal terminal control
  const double a = 1.5, b = 1.0, q = 1.0, r = 0.5, P = 30.0;
  const SystemModel m = scalar_model(a, b);
  const StageCost l = scalar_cost(q, r);
  const TerminalWeight lt = TerminalWeight::quadratic(Mat::Constant(1, 1, P));
  const ConstraintSets sets = ConstraintSets::none();
  const Vec x0 = Vec::Constant(1, 1.7);

  const HorizonSolution sol = solve_horizon(m, l, sets, x0, 2, std::nullopt, lt);
  REQUIRE(sol.optimal());
  const Vec xN = sol.x_star.back();
  const OneStepValue tail = one_step_value_weighted(m, lt.P, l.R(), sets, xN);
  REQUIRE(tail.feasible);
  const Certificate classic = check_classic(m, l, lt, sets, xN, tail.u_star);
  REQUIRE(classic.verdict);
  const Certificate tw = check_thm_tw(sol, m, l, lt, sets);
  CHECK(tw.verdict);
}

TEST_CASE("certificate csv row shape") {
  Certificate c;
  c.kind = CertKind::Thm1;
  c.k = 3;
  c.lhs = 1.25;
  c.rhs = 2.5;
  c.margin = 1.25;
  c.verdict = true;
  CHECK(c.csv_row() == "thm1,3,1.25,2.5,1.25,1");
}
