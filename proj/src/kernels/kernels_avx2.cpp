// AVX2/FMA variants of the arithmetic kernels. This translation unit is the
// only one compiled with -mavx2 -mfma; it must not be entered unless the
// running CPU supports both (the dispatcher checks before handing out the
// table).

#include "confagg/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <bit>

namespace confagg::kernels {
namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

std::size_t count_greater_avx2(const double* x, std::size_t n, double t) {
  const __m256d vt = _mm256_set1_pd(t);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d cmp = _mm256_cmp_pd(_mm256_loadu_pd(x + i), vt, _CMP_GT_OQ);
    c += std::popcount(static_cast<unsigned>(_mm256_movemask_pd(cmp)));
  }
  for (; i < n; ++i) c += (x[i] > t) ? 1u : 0u;
  return c;
}

std::size_t count_leq_avx2(const double* x, std::size_t n, double t) {
  const __m256d vt = _mm256_set1_pd(t);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d cmp = _mm256_cmp_pd(_mm256_loadu_pd(x + i), vt, _CMP_LE_OQ);
    c += std::popcount(static_cast<unsigned>(_mm256_movemask_pd(cmp)));
  }
  for (; i < n; ++i) c += (x[i] <= t) ? 1u : 0u;
  return c;
}

double pinball_loss_avx2(const double* r, std::size_t n, double tau) {
  const __m256d vhi = _mm256_set1_pd(tau);
  const __m256d vlo = _mm256_set1_pd(tau - 1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vr = _mm256_loadu_pd(r + i);
    acc = _mm256_add_pd(acc, _mm256_max_pd(_mm256_mul_pd(vhi, vr), _mm256_mul_pd(vlo, vr)));
  }
  double out = hsum(acc);
  for (; i < n; ++i) {
    const double hi = tau * r[i];
    const double lo = (tau - 1.0) * r[i];
    out += hi > lo ? hi : lo;
  }
  return out;
}

void slab_counts_avx2(const double* proj, const double* covered01, std::size_t n, double lo,
                      double hi, std::size_t* inside, std::size_t* inside_covered) {
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vhi = _mm256_set1_pd(hi);
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t in = 0, cov = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vp = _mm256_loadu_pd(proj + i);
    const __m256d m = _mm256_and_pd(_mm256_cmp_pd(vp, vlo, _CMP_GE_OQ),
                                    _mm256_cmp_pd(vp, vhi, _CMP_LE_OQ));
    in += std::popcount(static_cast<unsigned>(_mm256_movemask_pd(m)));
    const __m256d vc = _mm256_cmp_pd(_mm256_loadu_pd(covered01 + i), half, _CMP_GT_OQ);
    cov += std::popcount(static_cast<unsigned>(_mm256_movemask_pd(_mm256_and_pd(m, vc))));
  }
  for (; i < n; ++i) {
    if (proj[i] >= lo && proj[i] <= hi) {
      ++in;
      if (covered01[i] != 0.0) ++cov;
    }
  }
  *inside = in;
  *inside_covered = cov;
}

}  // namespace

const Backend* avx2_table() {
  static const Backend table{
      "avx2",             dot_avx2,         sum_avx2,          axpy_avx2,
      count_greater_avx2, count_leq_avx2,   pinball_loss_avx2, slab_counts_avx2,
  };
  return &table;
}

}  // namespace confagg::kernels

#else

namespace confagg::kernels {
const Backend* avx2_table() { return nullptr; }
}  // namespace confagg::kernels

#endif
