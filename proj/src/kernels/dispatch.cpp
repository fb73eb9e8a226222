#include "glassbox/kernels.hpp"

#include <atomic>

namespace glassbox::kernels {

namespace {

Isa detect_best() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
  return Isa::scalar;
}

std::atomic<Isa> g_isa{detect_best()};

}  // namespace

bool cpu_has_avx2() { return detect_best() == Isa::avx2; }

Isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

void force_isa(Isa isa) { g_isa.store(isa, std::memory_order_relaxed); }

void reset_isa() { g_isa.store(detect_best(), std::memory_order_relaxed); }

std::string isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

void gemm(const float* a, const float* b, float* c, std::size_t m,
          std::size_t k, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    detail::gemm_avx2(a, b, c, m, k, n);
  } else {
    detail::gemm_scalar(a, b, c, m, k, n);
  }
}

void transpose(const float* a, float* out, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[j * m + i] = a[i * n + j];
    }
  }
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    detail::axpy_avx2(alpha, x, y, n);
  } else {
    detail::axpy_scalar(alpha, x, y, n);
  }
}

void scale(float alpha, float* x, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    detail::scale_avx2(alpha, x, n);
  } else {
    detail::scale_scalar(alpha, x, n);
  }
}

void add(const float* a, const float* b, float* out, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    detail::add_avx2(a, b, out, n);
  } else {
    detail::add_scalar(a, b, out, n);
  }
}

void mul(const float* a, const float* b, float* out, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    detail::mul_avx2(a, b, out, n);
  } else {
    detail::mul_scalar(a, b, out, n);
  }
}

void relu(const float* x, float* out, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    detail::relu_avx2(x, out, n);
  } else {
    detail::relu_scalar(x, out, n);
  }
}

void relu_backward(const float* x, const float* gy, float* gx, std::size_t n) {
  if (active_isa() == Isa::avx2) {
    detail::relu_backward_avx2(x, gy, gx, n);
  } else {
    detail::relu_backward_scalar(x, gy, gx, n);
  }
}

double dot_f64(const float* a, const float* b, std::size_t n) {
  if (active_isa() == Isa::avx2) return detail::dot_f64_avx2(a, b, n);
  return detail::dot_f64_scalar(a, b, n);
}

double sum_f64(const float* a, std::size_t n) {
  if (active_isa() == Isa::avx2) return detail::sum_f64_avx2(a, n);
  return detail::sum_f64_scalar(a, n);
}

double dot_d(const double* a, const double* b, std::size_t n) {
  if (active_isa() == Isa::avx2) return detail::dot_d_avx2(a, b, n);
  return detail::dot_d_scalar(a, b, n);
}

}  // namespace glassbox::kernels
