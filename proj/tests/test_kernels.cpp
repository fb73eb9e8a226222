#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "glassbox/kernels.hpp"
#include "glassbox/rng.hpp"

namespace k = glassbox::kernels;
using glassbox::Rng;

namespace {

std::vector<float> random_vec(Rng& rng, std::size_t n, float scale = 1.0f) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
  return v;
}

struct IsaGuard {
  ~IsaGuard() { k::reset_isa(); }
};

}  // namespace

TEST_CASE("gemm matches an f64 oracle") {
  Rng rng(1);
  for (auto [m, kk, n] : {std::tuple{3, 4, 5}, {17, 9, 23}, {1, 1, 1}, {8, 144, 64}}) {
    const auto a = random_vec(rng, static_cast<std::size_t>(m) * kk);
    const auto b = random_vec(rng, static_cast<std::size_t>(kk) * n);
    std::vector<float> c(static_cast<std::size_t>(m) * n, 0.0f);
    k::gemm(a.data(), b.data(), c.data(), m, kk, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < kk; ++p) {
          acc += static_cast<double>(a[i * kk + p]) * b[p * n + j];
        }
        CHECK(std::abs(c[i * n + j] - acc) <= 1e-5 * std::max(1.0, std::abs(acc)));
      }
    }
  }
}

TEST_CASE("f32 kernels are bit-identical across isas") {
  if (!k::cpu_has_avx2()) return;  // nothing to compare on this machine
  IsaGuard guard;
  Rng rng(2);
  // Sizes straddle the 64-wide tile, the 8-wide loop, and scalar tails.
  for (std::size_t n : {1u, 7u, 8u, 9u, 63u, 64u, 65u, 144u, 1000u}) {
    const auto a = random_vec(rng, n, 3.0f);
    const auto b = random_vec(rng, n, 3.0f);

    auto run_elementwise = [&](k::Isa isa) {
      k::force_isa(isa);
      std::vector<float> add_out(n), mul_out(n), relu_out(n), axpy_out(b),
          scale_out(a), relu_gx(n, 0.5f);
      k::add(a.data(), b.data(), add_out.data(), n);
      k::mul(a.data(), b.data(), mul_out.data(), n);
      k::relu(a.data(), relu_out.data(), n);
      k::axpy(0.37f, a.data(), axpy_out.data(), n);
      k::scale(-1.25f, scale_out.data(), n);
      k::relu_backward(a.data(), b.data(), relu_gx.data(), n);
      return std::tuple{add_out, mul_out, relu_out, axpy_out, scale_out, relu_gx};
    };
    CHECK(run_elementwise(k::Isa::scalar) == run_elementwise(k::Isa::avx2));
  }

  for (auto [m, kk, n] : {std::tuple{5, 7, 9}, {16, 33, 70}, {3, 144, 144},
                          {2, 50, 36}, {11, 13, 200}}) {
    const auto a = random_vec(rng, static_cast<std::size_t>(m) * kk, 2.0f);
    const auto b = random_vec(rng, static_cast<std::size_t>(kk) * n, 2.0f);
    auto run = [&](k::Isa isa) {
      k::force_isa(isa);
      std::vector<float> c(static_cast<std::size_t>(m) * n, 0.1f);
      k::gemm(a.data(), b.data(), c.data(), m, kk, n);
      return c;
    };
    const auto cs = run(k::Isa::scalar);
    const auto cv = run(k::Isa::avx2);
    REQUIRE(cs.size() == cv.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
      CHECK(cs[i] == cv[i]);  // exact, not approximate
    }
  }
}

TEST_CASE("f64 reductions agree across isas to tight tolerance") {
  if (!k::cpu_has_avx2()) return;
  IsaGuard guard;
  Rng rng(3);
  for (std::size_t n : {1u, 9u, 100u, 1001u}) {
    const auto a = random_vec(rng, n, 5.0f);
    const auto b = random_vec(rng, n, 5.0f);
    std::vector<double> ad(n), bd(n);
    for (std::size_t i = 0; i < n; ++i) {
      ad[i] = a[i];
      bd[i] = b[i];
    }
    k::force_isa(k::Isa::scalar);
    const double d1 = k::dot_f64(a.data(), b.data(), n);
    const double s1 = k::sum_f64(a.data(), n);
    const double dd1 = k::dot_d(ad.data(), bd.data(), n);
    k::force_isa(k::Isa::avx2);
    const double d2 = k::dot_f64(a.data(), b.data(), n);
    const double s2 = k::sum_f64(a.data(), n);
    const double dd2 = k::dot_d(ad.data(), bd.data(), n);
    CHECK(std::abs(d1 - d2) <= 1e-10 * std::max(1.0, std::abs(d1)));
    CHECK(std::abs(s1 - s2) <= 1e-10 * std::max(1.0, std::abs(s1)));
    CHECK(std::abs(dd1 - dd2) <= 1e-12 * std::max(1.0, std::abs(dd1)));
  }
}

TEST_CASE("transpose round-trips") {
  Rng rng(4);
  const std::size_t m = 13, n = 29;
  const auto a = random_vec(rng, m * n);
  std::vector<float> t(n * m), back(m * n);
  k::transpose(a.data(), t.data(), m, n);
  k::transpose(t.data(), back.data(), n, m);
  CHECK(a == back);
  CHECK(t[3 * m + 2] == a[2 * n + 3]);
}

TEST_CASE("dispatch reports a valid isa and can be forced") {
  IsaGuard guard;
  k::force_isa(k::Isa::scalar);
  CHECK(k::active_isa() == k::Isa::scalar);
  CHECK(k::isa_name(k::active_isa()) == "scalar");
  k::reset_isa();
  if (k::cpu_has_avx2()) {
    CHECK(k::active_isa() == k::Isa::avx2);
  } else {
    CHECK(k::active_isa() == k::Isa::scalar);
  }
}
