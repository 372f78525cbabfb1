#include "mpcs/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "mpcs/types.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define MPCS_X86 1
#include <immintrin.h>
#else
#define MPCS_X86 0
#endif

namespace mpcs::kernels {

namespace detail {

void scan_controls_2d_scalar(const double ax[2], const double b[2], double q11,
                             double q12, double q22, double r, ScanGrid g,
                             const double lo[2], const double hi[2], double tol,
                             double* cost, double* x1p, double* x2p, std::uint8_t* feas) {
  for (int j = 0; j < g.count; ++j) {
    const double u = g.u0 + j * g.du;
    const double p1 = ax[0] + b[0] * u;
    const double p2 = ax[1] + b[1] * u;
    cost[j] = q11 * p1 * p1 + 2.0 * q12 * p1 * p2 + q22 * p2 * p2 + r * u * u;
    x1p[j] = p1;
    x2p[j] = p2;
    feas[j] = (p1 >= lo[0] - tol) && (p1 <= hi[0] + tol) && (p2 >= lo[1] - tol) &&
                      (p2 <= hi[1] + tol)
                  ? 1
                  : 0;
  }
}

void scan_controls_1d_scalar(double ax, double b, double q, double r, ScanGrid g,
                             double lo, double hi, double tol, double* cost, double* xp,
                             std::uint8_t* feas) {
  for (int j = 0; j < g.count; ++j) {
    const double u = g.u0 + j * g.du;
    const double p = ax + b * u;
    cost[j] = q * p * p + r * u * u;
    xp[j] = p;
    feas[j] = (p >= lo - tol) && (p <= hi + tol) ? 1 : 0;
  }
}

void quadform_2d_scalar(double q11, double q12, double q22, const double* xs,
                        const double* ys, int count, double* out) {
  for (int i = 0; i < count; ++i) {
    out[i] = q11 * xs[i] * xs[i] + 2.0 * q12 * xs[i] * ys[i] + q22 * ys[i] * ys[i];
  }
}

#if MPCS_X86

__attribute__((target("avx2,fma"))) void scan_controls_2d_avx2(
    const double ax[2], const double b[2], double q11, double q12, double q22, double r,
    ScanGrid g, const double lo[2], const double hi[2], double tol, double* cost,
    double* x1p, double* x2p, std::uint8_t* feas) {
  const __m256d vu0 = _mm256_set1_pd(g.u0);
  const __m256d vdu = _mm256_set1_pd(g.du);
  const __m256d vax1 = _mm256_set1_pd(ax[0]);
  const __m256d vax2 = _mm256_set1_pd(ax[1]);
  const __m256d vb1 = _mm256_set1_pd(b[0]);
  const __m256d vb2 = _mm256_set1_pd(b[1]);
  const __m256d vq11 = _mm256_set1_pd(q11);
  const __m256d vq12x2 = _mm256_set1_pd(2.0 * q12);
  const __m256d vq22 = _mm256_set1_pd(q22);
  const __m256d vr = _mm256_set1_pd(r);
  const __m256d vlo1 = _mm256_set1_pd(lo[0] - tol);
  const __m256d vhi1 = _mm256_set1_pd(hi[0] + tol);
  const __m256d vlo2 = _mm256_set1_pd(lo[1] - tol);
  const __m256d vhi2 = _mm256_set1_pd(hi[1] + tol);
  const __m256d idx_step = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

  int j = 0;
  for (; j + 4 <= g.count; j += 4) {
    const __m256d vj = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(j)), idx_step);
    const __m256d u = _mm256_fmadd_pd(vj, vdu, vu0);
    const __m256d p1 = _mm256_fmadd_pd(vb1, u, vax1);
    const __m256d p2 = _mm256_fmadd_pd(vb2, u, vax2);
    __m256d c = _mm256_mul_pd(_mm256_mul_pd(vq11, p1), p1);
    c = _mm256_fmadd_pd(_mm256_mul_pd(vq12x2, p1), p2, c);
    c = _mm256_fmadd_pd(_mm256_mul_pd(vq22, p2), p2, c);
    c = _mm256_fmadd_pd(_mm256_mul_pd(vr, u), u, c);
    _mm256_storeu_pd(cost + j, c);
    _mm256_storeu_pd(x1p + j, p1);
    _mm256_storeu_pd(x2p + j, p2);
    const __m256d ok = _mm256_and_pd(
        _mm256_and_pd(_mm256_cmp_pd(p1, vlo1, _CMP_GE_OQ), _mm256_cmp_pd(p1, vhi1, _CMP_LE_OQ)),
        _mm256_and_pd(_mm256_cmp_pd(p2, vlo2, _CMP_GE_OQ), _mm256_cmp_pd(p2, vhi2, _CMP_LE_OQ)));
    const int mask = _mm256_movemask_pd(ok);
    feas[j] = (mask & 1) ? 1 : 0;
    feas[j + 1] = (mask & 2) ? 1 : 0;
    feas[j + 2] = (mask & 4) ? 1 : 0;
    feas[j + 3] = (mask & 8) ? 1 : 0;
  }
  if (j < g.count) {
    ScanGrid tail{g.u0 + j * g.du, g.du, g.count - j};
    scan_controls_2d_scalar(ax, b, q11, q12, q22, r, tail, lo, hi, tol, cost + j, x1p + j,
                            x2p + j, feas + j);
  }
}

__attribute__((target("avx2,fma"))) void scan_controls_1d_avx2(
    double ax, double b, double q, double r, ScanGrid g, double lo, double hi, double tol,
    double* cost, double* xp, std::uint8_t* feas) {
  const __m256d vu0 = _mm256_set1_pd(g.u0);
  const __m256d vdu = _mm256_set1_pd(g.du);
  const __m256d vax = _mm256_set1_pd(ax);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d vq = _mm256_set1_pd(q);
  const __m256d vr = _mm256_set1_pd(r);
  const __m256d vlo = _mm256_set1_pd(lo - tol);
  const __m256d vhi = _mm256_set1_pd(hi + tol);
  const __m256d idx_step = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);

  int j = 0;
  for (; j + 4 <= g.count; j += 4) {
    const __m256d vj = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(j)), idx_step);
    const __m256d u = _mm256_fmadd_pd(vj, vdu, vu0);
    const __m256d p = _mm256_fmadd_pd(vb, u, vax);
    __m256d c = _mm256_mul_pd(_mm256_mul_pd(vq, p), p);
    c = _mm256_fmadd_pd(_mm256_mul_pd(vr, u), u, c);
    _mm256_storeu_pd(cost + j, c);
    _mm256_storeu_pd(xp + j, p);
    const __m256d ok =
        _mm256_and_pd(_mm256_cmp_pd(p, vlo, _CMP_GE_OQ), _mm256_cmp_pd(p, vhi, _CMP_LE_OQ));
    const int mask = _mm256_movemask_pd(ok);
    feas[j] = (mask & 1) ? 1 : 0;
    feas[j + 1] = (mask & 2) ? 1 : 0;
    feas[j + 2] = (mask & 4) ? 1 : 0;
    feas[j + 3] = (mask & 8) ? 1 : 0;
  }
  if (j < g.count) {
    ScanGrid tail{g.u0 + j * g.du, g.du, g.count - j};
    scan_controls_1d_scalar(ax, b, q, r, tail, lo, hi, tol, cost + j, xp + j, feas + j);
  }
}

__attribute__((target("avx2,fma"))) void quadform_2d_avx2(double q11, double q12,
                                                          double q22, const double* xs,
                                                          const double* ys, int count,
                                                          double* out) {
  const __m256d vq11 = _mm256_set1_pd(q11);
  const __m256d vq12x2 = _mm256_set1_pd(2.0 * q12);
  const __m256d vq22 = _mm256_set1_pd(q22);
  int i = 0;
  for (; i + 4 <= count; i += 4) {
    const __m256d x = _mm256_loadu_pd(xs + i);
    const __m256d y = _mm256_loadu_pd(ys + i);
    __m256d c = _mm256_mul_pd(_mm256_mul_pd(vq11, x), x);
    c = _mm256_fmadd_pd(_mm256_mul_pd(vq12x2, x), y, c);
    c = _mm256_fmadd_pd(_mm256_mul_pd(vq22, y), y, c);
    _mm256_storeu_pd(out + i, c);
  }
  if (i < count) quadform_2d_scalar(q11, q12, q22, xs + i, ys + i, count - i, out + i);
}

#else  // !MPCS_X86

void scan_controls_2d_avx2(const double ax[2], const double b[2], double q11, double q12,
                           double q22, double r, ScanGrid g, const double lo[2],
                           const double hi[2], double tol, double* cost, double* x1p,
                           double* x2p, std::uint8_t* feas) {
  scan_controls_2d_scalar(ax, b, q11, q12, q22, r, g, lo, hi, tol, cost, x1p, x2p, feas);
}

void scan_controls_1d_avx2(double ax, double b, double q, double r, ScanGrid g, double lo,
                           double hi, double tol, double* cost, double* xp,
                           std::uint8_t* feas) {
  scan_controls_1d_scalar(ax, b, q, r, g, lo, hi, tol, cost, xp, feas);
}

void quadform_2d_avx2(double q11, double q12, double q22, const double* xs,
                      const double* ys, int count, double* out) {
  quadform_2d_scalar(q11, q12, q22, xs, ys, count, out);
}

#endif

}  // namespace detail

namespace {

Backend detect_backend() {
#if MPCS_X86
  if (const char* env = std::getenv("MPCS_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
  }
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return Backend::Avx2;
  }
#endif
  return Backend::Scalar;
}

std::atomic<Backend> g_backend{detect_backend()};

}  // namespace

bool avx2_supported() {
#if MPCS_X86
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported()) {
    throw UnsupportedError("AVX2 kernels are not supported on this machine");
  }
  g_backend.store(b, std::memory_order_relaxed);
}

void scan_controls_2d(const double ax[2], const double b[2], double q11, double q12,
                      double q22, double r, ScanGrid g, const double lo[2],
                      const double hi[2], double tol, double* cost, double* x1p,
                      double* x2p, std::uint8_t* feas) {
  if (active_backend() == Backend::Avx2) {
    detail::scan_controls_2d_avx2(ax, b, q11, q12, q22, r, g, lo, hi, tol, cost, x1p, x2p,
                                  feas);
  } else {
    detail::scan_controls_2d_scalar(ax, b, q11, q12, q22, r, g, lo, hi, tol, cost, x1p,
                                    x2p, feas);
  }
}

void scan_controls_1d(double ax, double b, double q, double r, ScanGrid g, double lo,
                      double hi, double tol, double* cost, double* xp, std::uint8_t* feas) {
  if (active_backend() == Backend::Avx2) {
    detail::scan_controls_1d_avx2(ax, b, q, r, g, lo, hi, tol, cost, xp, feas);
  } else {
    detail::scan_controls_1d_scalar(ax, b, q, r, g, lo, hi, tol, cost, xp, feas);
  }
}

void quadform_2d(double q11, double q12, double q22, const double* xs, const double* ys,
                 int count, double* out) {
  if (active_backend() == Backend::Avx2) {
    detail::quadform_2d_avx2(q11, q12, q22, xs, ys, count, out);
  } else {
    detail::quadform_2d_scalar(q11, q12, q22, xs, ys, count, out);
  }
}

int argmin_feasible(const double* cost, const std::uint8_t* feas, int count) {
  int best = -1;
  double best_cost = 0.0;
  for (int j = 0; j < count; ++j) {
    if (!feas[j]) continue;
    if (best < 0 || cost[j] < best_cost) {
      best = j;
      best_cost = cost[j];
    }
  }
  return best;
}

}  // namespace mpcs::kernels
