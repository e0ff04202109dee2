// AVX2/FMA variants of the dense kernels. Functions carry a target
// attribute so the rest of the build does not need -mavx2; they are only
// called after the dispatcher has checked CPUID.

#include <cmath>
#include <cstring>

#include "rwrl/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define RWRL_HAVE_X86 1
#include <immintrin.h>
#else
#define RWRL_HAVE_X86 0
#endif

namespace rwrl::kernels::avx2 {

#if RWRL_HAVE_X86

#define RWRL_AVX2 __attribute__((target("avx2,fma")))

namespace {

RWRL_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  const __m128d sh = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

RWRL_AVX2 inline double dot_impl(const double* x, const double* y,
                                 std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

RWRL_AVX2 inline void axpy_impl(double a, const double* x, double* y,
                                std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy =
        _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

RWRL_AVX2 void gemv(const double* w, const double* b, const double* x,
                    double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot_impl(w + r * cols, x, cols) + b[r];
  }
}

RWRL_AVX2 void gemv_t_acc(const double* w, const double* g, double* x_grad,
                          std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] == 0.0) continue;
    axpy_impl(g[r], w + r * cols, x_grad, cols);
  }
}

RWRL_AVX2 void ger_acc(const double* g, const double* x, double* w_grad,
                       std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (g[r] == 0.0) continue;
    axpy_impl(g[r], x, w_grad + r * cols, cols);
  }
}

RWRL_AVX2 void axpy(double a, const double* x, double* y, std::size_t n) {
  axpy_impl(a, x, y, n);
}

RWRL_AVX2 double dot(const double* x, const double* y, std::size_t n) {
  return dot_impl(x, y, n);
}

RWRL_AVX2 void adam_update(double* param, const double* grad, double* m,
                           double* v, const unsigned char* mask, std::size_t n,
                           const AdamCoefficients& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d one_b1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d one_b2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d inv_bc1 = _mm256_set1_pd(1.0 / c.bias_correction1);
  const __m256d inv_bc2 = _mm256_set1_pd(1.0 / c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // Masked lanes are blended back to their old values.
    int mask_bits;
    std::memcpy(&mask_bits, mask + i, sizeof(mask_bits));
    const __m256d keep = _mm256_castsi256_pd(_mm256_cmpeq_epi64(
        _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(mask_bits)),
        _mm256_setzero_si256()));
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d m_old = _mm256_loadu_pd(m + i);
    const __m256d v_old = _mm256_loadu_pd(v + i);
    const __m256d p_old = _mm256_loadu_pd(param + i);
    const __m256d m_new = _mm256_fmadd_pd(b1, m_old, _mm256_mul_pd(one_b1, g));
    const __m256d v_new = _mm256_fmadd_pd(
        b2, v_old, _mm256_mul_pd(one_b2, _mm256_mul_pd(g, g)));
    const __m256d m_hat = _mm256_mul_pd(m_new, inv_bc1);
    const __m256d v_hat = _mm256_mul_pd(v_new, inv_bc2);
    const __m256d step = _mm256_div_pd(
        _mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    const __m256d p_new = _mm256_sub_pd(p_old, step);
    _mm256_storeu_pd(m + i, _mm256_blendv_pd(m_new, m_old, keep));
    _mm256_storeu_pd(v + i, _mm256_blendv_pd(v_new, v_old, keep));
    _mm256_storeu_pd(param + i, _mm256_blendv_pd(p_new, p_old, keep));
  }
  if (i < n) scalar::adam_update(param + i, grad + i, m + i, v + i, mask + i,
                                 n - i, c);
}

#undef RWRL_AVX2

#else  // !RWRL_HAVE_X86

void gemv(const double* w, const double* b, const double* x, double* y,
          std::size_t rows, std::size_t cols) {
  scalar::gemv(w, b, x, y, rows, cols);
}
void gemv_t_acc(const double* w, const double* g, double* x_grad,
                std::size_t rows, std::size_t cols) {
  scalar::gemv_t_acc(w, g, x_grad, rows, cols);
}
void ger_acc(const double* g, const double* x, double* w_grad,
             std::size_t rows, std::size_t cols) {
  scalar::ger_acc(g, x, w_grad, rows, cols);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
  scalar::axpy(a, x, y, n);
}
double dot(const double* x, const double* y, std::size_t n) {
  return scalar::dot(x, y, n);
}
void adam_update(double* param, const double* grad, double* m, double* v,
                 const unsigned char* mask, std::size_t n,
                 const AdamCoefficients& c) {
  scalar::adam_update(param, grad, m, v, mask, n, c);
}

#endif

}  // namespace rwrl::kernels::avx2
