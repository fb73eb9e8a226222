// AVX2 kernel variants. This translation unit is the only one compiled with
// -mavx2; everything here is reached through the runtime dispatch table.
//
// The f32 kernels use explicit mul+add intrinsics (not fma) and accumulate
// each output cell in the same order as the scalar reference, so the two
// variants are bit-identical. The f64 reductions use fma and lane-parallel
// accumulators and are only tolerance-equal to the reference.

#include "glassbox/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace glassbox::kernels::detail {

namespace {
constexpr std::size_t kTileCols = 64;  // 8 ymm accumulators per C tile
}

void gemm_avx2(const float* a, const float* b, float* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    float* crow = c + i * n;
    std::size_t j0 = 0;
    // Full 64-wide tiles: keep the C tile in registers across the k loop.
    for (; j0 + kTileCols <= n; j0 += kTileCols) {
      __m256 acc0 = _mm256_loadu_ps(crow + j0);
      __m256 acc1 = _mm256_loadu_ps(crow + j0 + 8);
      __m256 acc2 = _mm256_loadu_ps(crow + j0 + 16);
      __m256 acc3 = _mm256_loadu_ps(crow + j0 + 24);
      __m256 acc4 = _mm256_loadu_ps(crow + j0 + 32);
      __m256 acc5 = _mm256_loadu_ps(crow + j0 + 40);
      __m256 acc6 = _mm256_loadu_ps(crow + j0 + 48);
      __m256 acc7 = _mm256_loadu_ps(crow + j0 + 56);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256 av = _mm256_set1_ps(arow[p]);
        const float* brow = b + p * n + j0;
        acc0 = _mm256_add_ps(acc0, _mm256_mul_ps(av, _mm256_loadu_ps(brow)));
        acc1 =
            _mm256_add_ps(acc1, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 8)));
        acc2 =
            _mm256_add_ps(acc2, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 16)));
        acc3 =
            _mm256_add_ps(acc3, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 24)));
        acc4 =
            _mm256_add_ps(acc4, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 32)));
        acc5 =
            _mm256_add_ps(acc5, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 40)));
        acc6 =
            _mm256_add_ps(acc6, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 48)));
        acc7 =
            _mm256_add_ps(acc7, _mm256_mul_ps(av, _mm256_loadu_ps(brow + 56)));
      }
      _mm256_storeu_ps(crow + j0, acc0);
      _mm256_storeu_ps(crow + j0 + 8, acc1);
      _mm256_storeu_ps(crow + j0 + 16, acc2);
      _mm256_storeu_ps(crow + j0 + 24, acc3);
      _mm256_storeu_ps(crow + j0 + 32, acc4);
      _mm256_storeu_ps(crow + j0 + 40, acc5);
      _mm256_storeu_ps(crow + j0 + 48, acc6);
      _mm256_storeu_ps(crow + j0 + 56, acc7);
    }
    // Remaining 8-wide lanes.
    for (; j0 + 8 <= n; j0 += 8) {
      __m256 acc = _mm256_loadu_ps(crow + j0);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256 av = _mm256_set1_ps(arow[p]);
        acc = _mm256_add_ps(acc,
                            _mm256_mul_ps(av, _mm256_loadu_ps(b + p * n + j0)));
      }
      _mm256_storeu_ps(crow + j0, acc);
    }
    // Scalar tail.
    for (; j0 < n; ++j0) {
      float acc = crow[j0];
      for (std::size_t p = 0; p < k; ++p) {
        acc = acc + arow[p] * b[p * n + j0];
      }
      crow[j0] = acc;
    }
  }
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 yv = _mm256_loadu_ps(y + i);
    yv = _mm256_add_ps(yv, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, yv);
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_avx2(float alpha, float* x, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

void add_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(
        out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(
        out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void relu_avx2(const float* x, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_avx2(const float* x, const float* gy, float* gx,
                        std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 add = _mm256_and_ps(mask, _mm256_loadu_ps(gy + i));
    _mm256_storeu_ps(gx + i, _mm256_add_ps(_mm256_loadu_ps(gx + i), add));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0f) gx[i] += gy[i];
  }
}

double dot_f64_avx2(const float* a, const float* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 av = _mm256_loadu_ps(a + i);
    const __m256 bv = _mm256_loadu_ps(b + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(av)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(bv)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(av, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(bv, 1)), acc1);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double acc = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

double sum_f64_avx2(const float* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 av = _mm256_loadu_ps(a + i);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(av)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(av, 1)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double acc = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) acc += static_cast<double>(a[i]);
  return acc;
}

double dot_d_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double acc = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace glassbox::kernels::detail

#else

// Non-x86 build: the dispatcher never selects these.
namespace glassbox::kernels::detail {

void gemm_avx2(const float* a, const float* b, float* c, std::size_t m,
               std::size_t k, std::size_t n) {
  gemm_scalar(a, b, c, m, k, n);
}
void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  axpy_scalar(alpha, x, y, n);
}
void scale_avx2(float alpha, float* x, std::size_t n) {
  scale_scalar(alpha, x, n);
}
void add_avx2(const float* a, const float* b, float* out, std::size_t n) {
  add_scalar(a, b, out, n);
}
void mul_avx2(const float* a, const float* b, float* out, std::size_t n) {
  mul_scalar(a, b, out, n);
}
void relu_avx2(const float* x, float* out, std::size_t n) {
  relu_scalar(x, out, n);
}
void relu_backward_avx2(const float* x, const float* gy, float* gx,
                        std::size_t n) {
  relu_backward_scalar(x, gy, gx, n);
}
double dot_f64_avx2(const float* a, const float* b, std::size_t n) {
  return dot_f64_scalar(a, b, n);
}
double sum_f64_avx2(const float* a, std::size_t n) {
  return sum_f64_scalar(a, n);
}
double dot_d_avx2(const double* a, const double* b, std::size_t n) {
  return dot_d_scalar(a, b, n);
}

}  // namespace glassbox::kernels::detail

#endif
