#pragma once

#include <cstddef>
#include <string>

namespace glassbox::kernels {

// Numeric inner loops with a scalar reference implementation and an AVX2
// variant selected at runtime. For every f32 kernel the two variants are
// bit-identical: each output cell accumulates in the same order with plain
// mul+add (the build disables fp contraction), so switching the instruction
// set never changes results. dot_f64/sum_f64 reduce in vector lanes and may
// differ from the reference in the last few ulps; callers treat them as
// tolerance-equal.
enum class Isa { scalar, avx2 };

Isa active_isa();
void force_isa(Isa isa);
void reset_isa();  // back to the detected best
bool cpu_has_avx2();
std::string isa_name(Isa isa);

// c += a * b, row-major; a is m x k, b is k x n, c is m x n.
void gemm(const float* a, const float* b, float* c, std::size_t m,
          std::size_t k, std::size_t n);

// out = transpose(a); a is m x n row-major, out is n x m.
void transpose(const float* a, float* out, std::size_t m, std::size_t n);

void axpy(float alpha, const float* x, float* y, std::size_t n);  // y += a*x
void scale(float alpha, float* x, std::size_t n);
void add(const float* a, const float* b, float* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void relu(const float* x, float* out, std::size_t n);
// gx += gy where x > 0.
void relu_backward(const float* x, const float* gy, float* gx, std::size_t n);

// f64-accumulated reductions over f32 data.
double dot_f64(const float* a, const float* b, std::size_t n);
double sum_f64(const float* a, std::size_t n);

// Reductions over f64 data (coordinate descent works in doubles).
double dot_d(const double* a, const double* b, std::size_t n);

namespace detail {
void gemm_scalar(const float*, const float*, float*, std::size_t, std::size_t,
                 std::size_t);
void gemm_avx2(const float*, const float*, float*, std::size_t, std::size_t,
               std::size_t);
void axpy_scalar(float, const float*, float*, std::size_t);
void axpy_avx2(float, const float*, float*, std::size_t);
void scale_scalar(float, float*, std::size_t);
void scale_avx2(float, float*, std::size_t);
void add_scalar(const float*, const float*, float*, std::size_t);
void add_avx2(const float*, const float*, float*, std::size_t);
void mul_scalar(const float*, const float*, float*, std::size_t);
void mul_avx2(const float*, const float*, float*, std::size_t);
void relu_scalar(const float*, float*, std::size_t);
void relu_avx2(const float*, float*, std::size_t);
void relu_backward_scalar(const float*, const float*, float*, std::size_t);
void relu_backward_avx2(const float*, const float*, float*, std::size_t);
double dot_f64_scalar(const float*, const float*, std::size_t);
double dot_f64_avx2(const float*, const float*, std::size_t);
double sum_f64_scalar(const float*, std::size_t);
double sum_f64_avx2(const float*, std::size_t);
double dot_d_scalar(const double*, const double*, std::size_t);
double dot_d_avx2(const double*, const double*, std::size_t);
}  // namespace detail

}  // namespace glassbox::kernels
