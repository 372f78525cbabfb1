#pragma once

#include <cstdint>

namespace mpcs::kernels {

/// Runtime-selected implementation for the hot grid loops. Scalar is the
/// reference; the AVX2 path must match it to ~1 ulp (FMA rounding) and is
/// equivalence-tested against it.
enum class Backend { Scalar, Avx2 };

bool avx2_supported();
Backend active_backend();
/// Test/benchmark override. Throws UnsupportedError when the requested
/// backend is unavailable on this machine.
void set_backend(Backend b);

/// Evenly spaced control samples u_j = u0 + j * du, j = 0..count-1.
struct ScanGrid {
  double u0 = 0.0;
  double du = 0.0;
  int count = 0;
};

/// One-step control scan for a planar linear model with scalar input:
///   xp_j = ax + b * u_j   componentwise,
///   cost_j = q11*x1p^2 + 2*q12*x1p*x2p + q22*x2p^2 + r*u_j^2,
///   feas_j = 1 iff xp_j lies in [lo, hi] componentwise (tolerance tol).
/// Pass +/-inf bounds for an all-space state set.
void scan_controls_2d(const double ax[2], const double b[2], double q11, double q12,
                      double q22, double r, ScanGrid g, const double lo[2],
                      const double hi[2], double tol, double* cost, double* x1p,
                      double* x2p, std::uint8_t* feas);

/// Scalar-state version: xp_j = ax + b*u_j, cost_j = q*xp^2 + r*u^2.
void scan_controls_1d(double ax, double b, double q, double r, ScanGrid g, double lo,
                      double hi, double tol, double* cost, double* xp, std::uint8_t* feas);

/// Batched quadratic form out_i = q11*xs^2 + 2*q12*xs*ys + q22*ys^2.
void quadform_2d(double q11, double q12, double q22, const double* xs, const double* ys,
                 int count, double* out);

/// Index of the smallest feasible cost, or -1 when nothing is feasible.
/// Exact ties keep the lowest index.
int argmin_feasible(const double* cost, const std::uint8_t* feas, int count);

namespace detail {
// Direct entry points so the equivalence tests can drive both paths
// explicitly regardless of the dispatched default.
void scan_controls_2d_scalar(const double ax[2], const double b[2], double q11,
                             double q12, double q22, double r, ScanGrid g,
                             const double lo[2], const double hi[2], double tol,
                             double* cost, double* x1p, double* x2p, std::uint8_t* feas);
void scan_controls_2d_avx2(const double ax[2], const double b[2], double q11, double q12,
                           double q22, double r, ScanGrid g, const double lo[2],
                           const double hi[2], double tol, double* cost, double* x1p,
                           double* x2p, std::uint8_t* feas);
void scan_controls_1d_scalar(double ax, double b, double q, double r, ScanGrid g,
                             double lo, double hi, double tol, double* cost, double* xp,
                             std::uint8_t* feas);
void scan_controls_1d_avx2(double ax, double b, double q, double r, ScanGrid g,
                           double lo, double hi, double tol, double* cost, double* xp,
                           std::uint8_t* feas);
void quadform_2d_scalar(double q11, double q12, double q22, const double* xs,
                        const double* ys, int count, double* out);
void quadform_2d_avx2(double q11, double q12, double q22, const double* xs,
                      const double* ys, int count, double* out);
}  // namespace detail

}  // namespace mpcs::kernels
