#pragma once

#include <cassert>
#include <cstddef>
#include <span>

namespace confagg::kernels {

// Function table for the arithmetic inner loops shared by model training,
// p-value counting and coverage evaluation. Two implementations exist: a
// portable scalar reference and an AVX2/FMA variant compiled only for x86_64.
// The active table is picked once at startup; CONFAGG_KERNELS=scalar|avx2
// forces a backend (forcing avx2 on an unsupported CPU falls back to scalar).
struct Backend {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // #{i : x[i] > t}  (strict, matching the p-value indicator)
  std::size_t (*count_greater)(const double* x, std::size_t n, double t);
  // #{i : x[i] <= t} (the empirical-CDF indicator)
  std::size_t (*count_leq)(const double* x, std::size_t n, double t);
  // sum of max(tau*r, (tau-1)*r) over residuals r
  double (*pinball_loss)(const double* residual, std::size_t n, double tau);
  // Counts points with lo <= proj[i] <= hi, and how many of those have
  // covered01[i] != 0. covered01 entries must be exactly 0.0 or 1.0.
  void (*slab_counts)(const double* proj, const double* covered01, std::size_t n,
                      double lo, double hi, std::size_t* inside, std::size_t* inside_covered);
};

const Backend& scalar_backend();
// nullptr when the build target or the running CPU lacks AVX2+FMA.
const Backend* avx2_backend();
const Backend& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline std::size_t count_greater(std::span<const double> x, double t) {
  return active().count_greater(x.data(), x.size(), t);
}

inline std::size_t count_leq(std::span<const double> x, double t) {
  return active().count_leq(x.data(), x.size(), t);
}

inline double pinball_loss(std::span<const double> residual, double tau) {
  return active().pinball_loss(residual.data(), residual.size(), tau);
}

struct SlabCounts {
  std::size_t inside = 0;
  std::size_t inside_covered = 0;
};

inline SlabCounts slab_counts(std::span<const double> proj, std::span<const double> covered01,
                              double lo, double hi) {
  assert(proj.size() == covered01.size());
  SlabCounts c;
  active().slab_counts(proj.data(), covered01.data(), proj.size(), lo, hi, &c.inside,
                       &c.inside_covered);
  return c;
}

}  // namespace confagg::kernels
