#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>
#include <vector>

#include "mpcs/kernels.hpp"
#include "mpcs/types.hpp"

using namespace mpcs;
namespace k = mpcs::kernels;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Buffers {
  std::vector<double> cost, x1, x2;
  std::vector<std::uint8_t> feas;
  explicit Buffers(int n) : cost(n), x1(n), x2(n), feas(n) {}
};

}  // namespace

TEST_CASE("2d scan: scalar and AVX2 paths agree") {
  if (!k::avx2_supported()) return;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double ax[2] = {d(rng), d(rng)};
    const double b[2] = {d(rng), d(rng)};
    const double q11 = std::abs(d(rng)) + 0.1, q22 = std::abs(d(rng)) + 0.1;
    const double q12 = 0.3 * d(rng);
    const double r = std::abs(d(rng));
    // odd count exercises the scalar tail after the 4-wide blocks
    const k::ScanGrid g{d(rng), 0.013, 401};
    const bool boxed = trial % 2 == 0;
    const double lo[2] = {boxed ? -1.5 : -kInf, boxed ? -1.0 : -kInf};
    const double hi[2] = {boxed ? 1.5 : kInf, boxed ? 1.0 : kInf};

    Buffers s(g.count), v(g.count);
    k::detail::scan_controls_2d_scalar(ax, b, q11, q12, q22, r, g, lo, hi, kSetTol,
                                       s.cost.data(), s.x1.data(), s.x2.data(),
                                       s.feas.data());
    k::detail::scan_controls_2d_avx2(ax, b, q11, q12, q22, r, g, lo, hi, kSetTol,
                                     v.cost.data(), v.x1.data(), v.x2.data(),
                                     v.feas.data());
    for (int j = 0; j < g.count; ++j) {
      CHECK(std::abs(s.cost[j] - v.cost[j]) <= 1e-12 * (1.0 + std::abs(s.cost[j])));
      CHECK(s.x1[j] == doctest::Approx(v.x1[j]).epsilon(1e-14));
      CHECK(s.x2[j] == doctest::Approx(v.x2[j]).epsilon(1e-14));
      CHECK(s.feas[j] == v.feas[j]);
    }
  }
}

TEST_CASE("1d scan: scalar and AVX2 paths agree") {
  if (!k::avx2_supported()) return;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double ax = d(rng), b = d(rng);
    const double q = std::abs(d(rng)) + 0.1, r = std::abs(d(rng));
    const k::ScanGrid g{d(rng), 0.009, 203};
    const double lo = trial % 2 ? -kInf : -1.0;
    const double hi = trial % 2 ? kInf : 1.0;
    Buffers s(g.count), v(g.count);
    k::detail::scan_controls_1d_scalar(ax, b, q, r, g, lo, hi, kSetTol, s.cost.data(),
                                       s.x1.data(), s.feas.data());
    k::detail::scan_controls_1d_avx2(ax, b, q, r, g, lo, hi, kSetTol, v.cost.data(),
                                     v.x1.data(), v.feas.data());
    for (int j = 0; j < g.count; ++j) {
      CHECK(std::abs(s.cost[j] - v.cost[j]) <= 1e-12 * (1.0 + std::abs(s.cost[j])));
      CHECK(s.x1[j] == doctest::Approx(v.x1[j]).epsilon(1e-14));
      CHECK(s.feas[j] == v.feas[j]);
    }
  }
}

TEST_CASE("quadform batch: scalar and AVX2 paths agree") {
  if (!k::avx2_supported()) return;
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  const int n = 1001;
  std::vector<double> xs(n), ys(n), a(n), b(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = d(rng);
    ys[i] = d(rng);
  }
  k::detail::quadform_2d_scalar(1.1012, 0.5896, 0.3156, xs.data(), ys.data(), n, a.data());
  k::detail::quadform_2d_avx2(1.1012, 0.5896, 0.3156, xs.data(), ys.data(), n, b.data());
  for (int i = 0; i < n; ++i) {
    CHECK(std::abs(a[i] - b[i]) <= 1e-12 * (1.0 + std::abs(a[i])));
  }
}

TEST_CASE("feasibility mask honors the tolerance") {
  const k::ScanGrid g{0.0, 1.0, 1};
  double cost, xp;
  std::uint8_t feas;
  // xp = 1.0 + tol/2 must still count as inside [ -1, 1 ].
  k::detail::scan_controls_1d_scalar(1.0 + 0.5 * kSetTol, 0.0, 1.0, 0.0, g, -1.0, 1.0,
                                     kSetTol, &cost, &xp, &feas);
  CHECK(feas == 1);
  k::detail::scan_controls_1d_scalar(1.0 + 2.0 * kSetTol, 0.0, 1.0, 0.0, g, -1.0, 1.0,
                                     kSetTol, &cost, &xp, &feas);
  CHECK(feas == 0);
}

TEST_CASE("argmin over the feasible mask") {
  const std::vector<double> cost{3.0, 1.0, 0.5, 2.0};
  std::vector<std::uint8_t> feas{1, 1, 0, 1};
  CHECK(k::argmin_feasible(cost.data(), feas.data(), 4) == 1);
  feas = {0, 0, 0, 0};
  CHECK(k::argmin_feasible(cost.data(), feas.data(), 4) == -1);
  feas = {1, 1, 1, 1};
  CHECK(k::argmin_feasible(cost.data(), feas.data(), 4) == 2);
}

TEST_CASE("backend dispatch can be pinned") {
  const k::Backend original = k::active_backend();
  k::set_backend(k::Backend::Scalar);
  CHECK(k::active_backend() == k::Backend::Scalar);
  if (k::avx2_supported()) {
    k::set_backend(k::Backend::Avx2);
    CHECK(k::active_backend() == k::Backend::Avx2);
  }
  k::set_backend(original);
}
