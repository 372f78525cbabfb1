#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mpcs/mpcs.hpp"

using namespace mpcs;

namespace {

SystemModel agent() {
  Mat A(2, 2), B(2, 1);
  A << 0.7, 0.1, 0.8, 0.6;
  B << 0.8, -0.5;
  return SystemModel::linear(A, B);
}

SystemModel scalar_model(double a, double b) {
  return SystemModel::linear(Mat::Constant(1, 1, a), Mat::Constant(1, 1, b));
}

StageCost scalar_cost(double q, double r) {
  return StageCost::quadratic(Mat::Constant(1, 1, q), Mat::Constant(1, 1, r));
}

StateGrid scalar_grid(double span, int cells, int samples) {
  StateGrid g;
  g.lo = Vec::Constant(1, -span);
  g.hi = Vec::Constant(1, span);
  g.cells = cells;
  g.control_samples = samples;
  return g;
}

}  // namespace

TEST_CASE("mpcs_step: trivial at the origin") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  MpcsConfig cfg;
  cfg.N = 1;
  const MpcsStepRecord rec = mpcs_step(m, l, ConstraintSets::none(), cfg, Vec::Zero(2));
  REQUIRE(rec.feasible);
  CHECK(rec.alpha == 0.0);
  CHECK(rec.applied_u.norm() == 0.0);
  CHECK(rec.constraint_lhs <= kCertTol);
}

TEST_CASE("mpcs_step: agent distance cost is feasible and the loop stays bounded") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  const ConstraintSets sets = ConstraintSets::none();
  MpcsConfig cfg;
  cfg.N = 1;
  Vec x0(2);
  x0 << 1.0, 1.0;

  const ClosedLoopTrace trace = run_mpcs(m, l, sets, cfg, x0, 30);
  CHECK(trace.classification != RunClass::InfeasibleAt);
  CHECK(trace.steps.size() == 30);
  double prev = -1.0;
  for (const TraceStep& s : trace.steps) {
    REQUIRE(s.alpha.has_value());
    if (prev >= 0) CHECK(*s.alpha <= prev + kCertTol);
    prev = *s.alpha;
    CHECK(s.x.norm() < 3.0);  // bounded, unlike the plain distance-cost MPC
  }
  CHECK(trace.x_final.norm() < 3.0);
}

TEST_CASE("mpcs_step record invariant: constraint_lhs <= alpha + tau") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  const ConstraintSets sets = ConstraintSets::none();
  MpcsConfig cfg;
  cfg.N = 1;
  Vec x(2);
  x << 1.0, 1.0;
  for (int k = 0; k < 10; ++k) {
    const MpcsStepRecord rec = mpcs_step(m, l, sets, cfg, x);
    REQUIRE(rec.feasible);
    CHECK(rec.constraint_lhs <= rec.alpha + kCertTol);
    CHECK(rec.alpha ==
          doctest::Approx(one_step_value(m, l, sets, x).m_val).epsilon(1e-12));
    x = m.step(x, rec.applied_u);
  }
}

TEST_CASE("mpcs_step: scalar deadbeat feasibility for any weights") {
  // u = -(a/b) x always satisfies the constraint, so MPCS stays feasible
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(0.2, 2.5);
  for (int t = 0; t < 15; ++t) {
    const double a = 3.0 * (d(rng) - 1.25), b = d(rng), q = d(rng);
    const double r = t % 3 ? d(rng) : 0.0;
    if (std::abs(b) < 0.2) continue;
    const SystemModel m = scalar_model(a, b);
    const StageCost l = scalar_cost(q, r);
    MpcsConfig cfg;
    cfg.N = 1;
    const MpcsStepRecord rec =
        mpcs_step(m, l, ConstraintSets::none(), cfg, Vec::Constant(1, d(rng)));
    CHECK(rec.feasible);
  }
}

TEST_CASE("mpcs: strict variant contracts the boundary-pole scalar case") {
  // a=2, b=1, q=1, r=1: the plain N=1 closed loop has pole exactly 1. With
  // delta = 0 the MPCS optimum sits on the constraint boundary and |x| stays
  // put; the strict variant forces decrease and reaches the origin.
  const SystemModel m = scalar_model(2.0, 1.0);
  const StageCost l = scalar_cost(1.0, 1.0);
  const ConstraintSets sets = ConstraintSets::none();

  MpcsConfig flat;
  flat.N = 1;
  const ClosedLoopTrace plain = run_mpcs(m, l, sets, flat, Vec::Constant(1, 1.0), 20);
  CHECK(plain.classification != RunClass::InfeasibleAt);
  CHECK(plain.x_final[0] == doctest::Approx(1.0).epsilon(1e-6));

  MpcsConfig strict;
  strict.N = 1;
  strict.delta = 0.01;
  const ClosedLoopTrace trace = run_mpcs(m, l, sets, strict, Vec::Constant(1, 1.0), 300);
  CHECK(trace.classification == RunClass::Converged);
  double prev = -1.0;
  for (const TraceStep& s : trace.steps) {
    if (prev >= 0 && prev >= strict.delta) {
      CHECK(*s.alpha <= prev - strict.delta + kCertTol);
    }
    prev = *s.alpha;
  }
}

TEST_CASE("mpcs N=1: joint solve matches the nested reduction") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(0.3, 2.0);
  int done = 0;
  while (done < 10) {
    const double a = 3.0 * (d(rng) - 1.15), b = d(rng), q = d(rng);
    const double r = done % 2 ? d(rng) : 0.0;
    const SystemModel m = scalar_model(a, b);
    const StageCost l = scalar_cost(q, r);
    ConstraintSets sets = ConstraintSets::none();
    if (done % 3 == 0) sets.input = InputBox::symmetric(Vec::Constant(1, 3.0 * d(rng)));
    MpcsConfig cfg;
    cfg.N = 1;
    const Vec x = Vec::Constant(1, 1.5 * (d(rng) - 1.0));
    const MpcsStepRecord joint = mpcs_step(m, l, sets, cfg, x);
    const MpcsStepRecord nested = mpcs_step_nested(m, l, sets, cfg, x);
    if (!joint.feasible || !nested.feasible) continue;
    CHECK(std::abs(joint.applied_u[0] - nested.applied_u[0]) <= 1e-6);
    CHECK(std::abs(joint.sol.j_star - nested.sol.j_star) <=
          1e-6 * (1.0 + std::abs(nested.sol.j_star)));
    ++done;
  }
}

TEST_CASE("mpcs N=2 applies the second-stage constraint") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  const ConstraintSets sets = ConstraintSets::none();
  MpcsConfig cfg;
  cfg.N = 2;
  Vec x0(2);
  x0 << 1.0, 1.0;
  const ClosedLoopTrace trace = run_mpcs(m, l, sets, cfg, x0, 20);
  CHECK(trace.classification != RunClass::InfeasibleAt);
  double prev = -1.0;
  for (const TraceStep& s : trace.steps) {
    if (prev >= 0) CHECK(*s.alpha <= prev + kCertTol);
    prev = *s.alpha;
  }
}

TEST_CASE("run_mpcs: zero start gives a constant zero trace") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Zero(1, 1));
  MpcsConfig cfg;
  cfg.N = 1;
  const ClosedLoopTrace t = run_mpcs(m, l, ConstraintSets::none(), cfg, Vec::Zero(2), 10);
  CHECK(t.classification == RunClass::Converged);
  CHECK(t.converged_at == 0);
  for (const TraceStep& s : t.steps) CHECK(s.x.norm() == 0.0);
}

TEST_CASE("run_mpcs halts with a diagnostic on infeasibility") {
  // tiny input box, expanding plant: the constraint m(x1) <= alpha cannot be met
  const SystemModel m = scalar_model(3.0, 1.0);
  const StageCost l = scalar_cost(1.0, 0.0);
  ConstraintSets sets;
  sets.input = InputBox::symmetric(Vec::Constant(1, 0.05));
  MpcsConfig cfg;
  cfg.N = 1;
  const ClosedLoopTrace t = run_mpcs(m, l, sets, cfg, Vec::Constant(1, 1.0), 10);
  CHECK(t.classification == RunClass::InfeasibleAt);
  CHECK(t.infeasible_k == 0);
}

TEST_CASE("feasible set: scalar unconstrained keeps the whole sublevel set") {
  const SystemModel m = scalar_model(2.0, 1.0);
  const StageCost l = scalar_cost(1.0, 1.0);
  const ConstraintSets sets = ConstraintSets::none();
  const FeasibleSet fs = compute_feasible_set(m, l, sets, 1.0, scalar_grid(2.0, 201, 401));
  // deadbeat u = -(a/b) x keeps every sublevel node alive
  int seed_members = 0;
  for (size_t i = 0; i < fs.member.size(); ++i) {
    if (fs.m_cell[i] <= 1.0 + 1e-12) ++seed_members;
  }
  CHECK(fs.member_count() == seed_members);
  CHECK(fs.member_count() > 10);
}

TEST_CASE("feasible set: alpha = 0 keeps only the origin") {
  const SystemModel m = scalar_model(2.0, 1.0);
  const StageCost l = scalar_cost(1.0, 1.0);
  const FeasibleSet fs =
      compute_feasible_set(m, l, ConstraintSets::none(), 0.0, scalar_grid(2.0, 201, 401));
  CHECK(fs.member_count() == 1);
  CHECK(fs.contains_point(Vec::Zero(1)));
}

TEST_CASE("feasible set: tight input box shrinks below the sublevel set") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Constant(1, 1, 0.5));
  ConstraintSets sets;
  sets.input = InputBox::symmetric(Vec::Constant(1, 0.05));
  StateGrid g;
  g.lo = Vec::Constant(2, -1.5);
  g.hi = Vec::Constant(2, 1.5);
  g.cells = 41;
  g.control_samples = 101;
  const double alpha = 1.0;
  const FeasibleSet fs = compute_feasible_set(m, l, sets, alpha, g);
  int sub = 0;
  for (size_t i = 0; i < fs.member.size(); ++i) {
    if (fs.m_cell[i] <= alpha + 1e-12) ++sub;
  }
  CHECK(fs.member_count() < sub);  // reachability strictly bites
  CHECK(fs.member_count() > 0);

  // membership monotonically shrinks with the input bound
  ConstraintSets wider;
  wider.input = InputBox::symmetric(Vec::Constant(1, 0.5));
  const FeasibleSet fs_wide = compute_feasible_set(m, l, wider, alpha, g);
  CHECK(fs_wide.member_count() >= fs.member_count());
}

TEST_CASE("feasible set is a fixed point: one more sweep removes nothing") {
  const SystemModel m = agent();
  const StageCost l = StageCost::quadratic(Mat::Identity(2, 2), Mat::Constant(1, 1, 0.5));
  ConstraintSets sets;
  sets.input = InputBox::symmetric(Vec::Constant(1, 0.3));
  StateGrid g;
  g.lo = Vec::Constant(2, -1.5);
  g.hi = Vec::Constant(2, 1.5);
  g.cells = 31;
  g.control_samples = 101;
  FeasibleSet fs = compute_feasible_set(m, l, sets, 0.8, g);
  CHECK(refine_sweep(fs, m, l, sets) == 0);
}

TEST_CASE("restrict_to_level equals a fresh computation at the lower level") {
  const SystemModel m = scalar_model(1.6, 1.0);
  const StageCost l = scalar_cost(1.0, 0.5);
  ConstraintSets sets;
  sets.input = InputBox::symmetric(Vec::Constant(1, 2.0));
  const StateGrid g = scalar_grid(2.0, 101, 201);
  const FeasibleSet big = compute_feasible_set(m, l, sets, 1.2, g);
  const FeasibleSet cut = restrict_to_level(big, m, l, sets, 0.4);
  const FeasibleSet fresh = compute_feasible_set(m, l, sets, 0.4, g);
  REQUIRE(cut.member.size() == fresh.member.size());
  for (size_t i = 0; i < cut.member.size(); ++i) CHECK(cut.member[i] == fresh.member[i]);
  for (size_t i = 0; i < cut.member.size(); ++i) CHECK(cut.member[i] <= big.member[i]);
}

TEST_CASE("mpcs_step_rf matches mpcs_step when the constraint is inactive") {
  // stable scalar plant: the unconstrained stage minimizer already shrinks m
  const SystemModel m = scalar_model(0.8, 1.0);
  const StageCost l = scalar_cost(1.0, 0.5);
  ConstraintSets sets;
  sets.input = InputBox::symmetric(Vec::Constant(1, 3.0));
  MpcsConfig cfg;
  cfg.N = 1;
  cfg.grid = scalar_grid(2.0, 401, 801);

  Vec x = Vec::Constant(1, 1.0);
  const double level0 = gridded_one_step(m, l, sets, cfg.grid, x);
  REQUIRE(std::isfinite(level0));
  FeasibleSet fs = compute_feasible_set(m, l, sets, level0, cfg.grid);

  for (int k = 0; k < 12; ++k) {
    const MpcsStepRecord a = mpcs_step(m, l, sets, cfg, x);
    const MpcsStepRecord b = mpcs_step_rf(m, l, sets, cfg, x, fs);
    REQUIRE(a.feasible);
    REQUIRE(b.feasible);
    CHECK(std::abs(a.applied_u[0] - b.applied_u[0]) <= 1e-6);
    x = m.step(x, a.applied_u);
    const int idx = fs.snap_index(x);
    REQUIRE(idx >= 0);
    if (fs.m_cell[idx] < fs.alpha - 1e-12) {
      fs = restrict_to_level(fs, m, l, sets, fs.m_cell[idx]);
    }
  }
}

TEST_CASE("mpcs_step_rf: member cells stay feasible along short runs") {
  const SystemModel m = scalar_model(1.5, 1.0);
  const StageCost l = scalar_cost(1.0, 0.0);
  ConstraintSets sets;
  sets.input = InputBox::symmetric(Vec::Constant(1, 4.0));
  MpcsConfig cfg;
  cfg.N = 1;
  cfg.rf_mode = RfMode::InvariantSet;
  cfg.grid = scalar_grid(1.5, 101, 201);

  const Vec x0 = Vec::Constant(1, 1.0);
  const double alpha0 = gridded_one_step(m, l, sets, cfg.grid, x0);
  const FeasibleSet fs = compute_feasible_set(m, l, sets, alpha0, cfg.grid);
  REQUIRE(fs.contains_point(x0));
  int starts = 0;
  for (size_t i = 0; i < fs.member.size(); ++i) {
    if (!fs.member[i]) continue;
    if (++starts % 5 != 0) continue;  // sample member cells
    const ClosedLoopTrace t = run_mpcs(m, l, sets, cfg, fs.node_center(int(i)), 20);
    CHECK(t.classification != RunClass::InfeasibleAt);
  }
  CHECK(starts > 5);
}

TEST_CASE("feasible set export and guards") {
  const SystemModel m = scalar_model(1.2, 1.0);
  const StageCost l = scalar_cost(1.0, 0.2);
  const FeasibleSet fs =
      compute_feasible_set(m, l, ConstraintSets::none(), 0.5, scalar_grid(1.0, 21, 51));
  const std::string csv = fs.to_csv();
  CHECK(csv.rfind("x1,member\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 22);  // header + 21 nodes

  StateGrid huge = scalar_grid(1.0, 2001, 2001);
  huge.cells = 1000001;
  CHECK_THROWS_AS(compute_feasible_set(m, l, ConstraintSets::none(), 0.5, huge),
                  BudgetError);
  StateGrid off = scalar_grid(1.0, 21, 51);
  off.lo = Vec::Constant(1, 0.5);
  CHECK_THROWS_AS(compute_feasible_set(m, l, ConstraintSets::none(), 0.5, off),
                  ArgumentError);
}
