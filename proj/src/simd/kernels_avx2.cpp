// Compiled with -mavx2 only. FMA is deliberately not enabled: each lane must
// round exactly like the scalar reference (separate multiply, then add).
#include <immintrin.h>

#include <cmath>

#include "bprg/simd/kernels.hpp"
#include "kernels_avx2.hpp"

namespace bprg::simd::avx2 {
namespace {

// ---- float: 8 lanes ------------------------------------------------------

void axpy_f32(std::size_t n, float a, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void add_f32(std::size_t n, const float* x, float* y) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] = y[i] + x[i];
}

void mul_f32(std::size_t n, const float* a, const float* b, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void relu_f32(std::size_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  // max(x, +0) returns the second operand for +-0, matching `x > 0 ? x : 0`.
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_f32(std::size_t n, const float* x, const float* dy, float* dx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 pos = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    __m256 pass = _mm256_and_ps(pos, _mm256_loadu_ps(dy + i));
    _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), pass));
  }
  for (; i < n; ++i) dx[i] = dx[i] + (x[i] > 0.0f ? dy[i] : 0.0f);
}

void apply_mask_f32(std::size_t n, const std::uint8_t* mask, float* x) {
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(mask + i));
    __m256i wide = _mm256_cvtepu8_epi32(bytes);
    __m256i keep = _mm256_xor_si256(_mm256_cmpeq_epi32(wide, zero), _mm256_set1_epi32(-1));
    _mm256_storeu_ps(x + i, _mm256_and_ps(_mm256_castsi256_ps(keep), _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) x[i] = mask[i] != 0 ? x[i] : 0.0f;
}

void sgd_momentum_f32(std::size_t n, float lr, float momentum, const float* g, float* v, float* w) {
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 vmom = _mm256_set1_ps(momentum);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vel = _mm256_add_ps(_mm256_mul_ps(vmom, _mm256_loadu_ps(v + i)), _mm256_loadu_ps(g + i));
    _mm256_storeu_ps(v + i, vel);
    _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), _mm256_mul_ps(vlr, vel)));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + g[i];
    w[i] = w[i] - lr * v[i];
  }
}

float dot_f32(std::size_t n, const float* x, const float* y) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_add_ps(acc0, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    acc1 = _mm256_add_ps(acc1, _mm256_mul_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8)));
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_add_ps(acc0, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  acc0 = _mm256_add_ps(acc0, acc1);
  __m128 lo = _mm_add_ps(_mm256_castps256_ps128(acc0), _mm256_extractf128_ps(acc0, 1));
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 0x55));
  float acc = _mm_cvtss_f32(lo);
  for (; i < n; ++i) acc = acc + x[i] * y[i];
  return acc;
}

bool all_finite_f32(std::size_t n, const float* x) {
  __m256 bad = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    // x - x is 0 for finite x and NaN for Inf/NaN.
    bad = _mm256_or_ps(bad, _mm256_cmp_ps(_mm256_sub_ps(v, v), _mm256_setzero_ps(), _CMP_NEQ_UQ));
  }
  if (_mm256_movemask_ps(bad) != 0) return false;
  for (; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

// ---- double: 4 lanes -----------------------------------------------------

void axpy_f64(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void add_f64(std::size_t n, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = y[i] + x[i];
}

void mul_f64(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void relu_f64(std::size_t n, const double* x, double* y) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_f64(std::size_t n, const double* x, const double* dy, double* dx) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d pos = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d pass = _mm256_and_pd(pos, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), pass));
  }
  for (; i < n; ++i) dx[i] = dx[i] + (x[i] > 0.0 ? dy[i] : 0.0);
}

void apply_mask_f64(std::size_t n, const std::uint8_t* mask, double* x) {
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    std::int32_t packed;
    __builtin_memcpy(&packed, mask + i, sizeof(packed));
    __m256i wide = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(packed));
    __m256i keep = _mm256_xor_si256(_mm256_cmpeq_epi64(wide, zero), _mm256_set1_epi64x(-1));
    _mm256_storeu_pd(x + i, _mm256_and_pd(_mm256_castsi256_pd(keep), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] = mask[i] != 0 ? x[i] : 0.0;
}

void sgd_momentum_f64(std::size_t n, double lr, double momentum, const double* g, double* v,
                      double* w) {
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d vmom = _mm256_set1_pd(momentum);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vel = _mm256_add_pd(_mm256_mul_pd(vmom, _mm256_loadu_pd(v + i)), _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(v + i, vel);
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(vlr, vel)));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + g[i];
    w[i] = w[i] - lr * v[i];
  }
}

double dot_f64(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  __m128d lo = _mm_add_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
  lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
  double sum = _mm_cvtsd_f64(lo);
  for (; i < n; ++i) sum = sum + x[i] * y[i];
  return sum;
}

bool all_finite_f64(std::size_t n, const double* x) {
  __m256d bad = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    bad = _mm256_or_pd(bad, _mm256_cmp_pd(_mm256_sub_pd(v, v), _mm256_setzero_pd(), _CMP_NEQ_UQ));
  }
  if (_mm256_movemask_pd(bad) != 0) return false;
  for (; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

constexpr KernelTable<float> kAvx2F32{Isa::avx2,        &axpy_f32,         &add_f32,
                                      &mul_f32,         &relu_f32,         &relu_backward_f32,
                                      &apply_mask_f32,  &sgd_momentum_f32, &dot_f32,
                                      &all_finite_f32};
constexpr KernelTable<double> kAvx2F64{Isa::avx2,        &axpy_f64,         &add_f64,
                                       &mul_f64,         &relu_f64,         &relu_backward_f64,
                                       &apply_mask_f64,  &sgd_momentum_f64, &dot_f64,
                                       &all_finite_f64};

}  // namespace

const KernelTable<float>& table_f32() { return kAvx2F32; }
const KernelTable<double>& table_f64() { return kAvx2F64; }

}  // namespace bprg::simd::avx2
