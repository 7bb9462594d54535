#include "confagg/kernels.hpp"

namespace confagg::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

std::size_t count_greater_scalar(const double* x, std::size_t n, double t) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += (x[i] > t) ? 1u : 0u;
  return c;
}

std::size_t count_leq_scalar(const double* x, std::size_t n, double t) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) c += (x[i] <= t) ? 1u : 0u;
  return c;
}

double pinball_loss_scalar(const double* r, std::size_t n, double tau) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = tau * r[i];
    const double lo = (tau - 1.0) * r[i];
    acc += hi > lo ? hi : lo;
  }
  return acc;
}

void slab_counts_scalar(const double* proj, const double* covered01, std::size_t n, double lo,
                        double hi, std::size_t* inside, std::size_t* inside_covered) {
  std::size_t in = 0, cov = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (proj[i] >= lo && proj[i] <= hi) {
      ++in;
      if (covered01[i] != 0.0) ++cov;
    }
  }
  *inside = in;
  *inside_covered = cov;
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend table{
      "scalar",           dot_scalar,       sum_scalar,          axpy_scalar,
      count_greater_scalar, count_leq_scalar, pinball_loss_scalar, slab_counts_scalar,
  };
  return table;
}

}  // namespace confagg::kernels
