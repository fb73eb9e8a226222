#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "glassbox/rng.hpp"

using glassbox::Rng;

TEST_CASE("same seed gives identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("forks are purpose-keyed and independent of draw position") {
  Rng a(42);
  Rng b(42);
  a.next_u64();  // advancing the parent must not change fork streams
  CHECK(a.fork("x").next_u64() == b.fork("x").next_u64());
  CHECK(a.fork("x").next_u64() != a.fork("y").next_u64());
}

TEST_CASE("uniform01 lies in [0,1) and is roughly uniform") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("uniform_int covers the range without bias at small n") {
  Rng rng(11);
  std::set<std::uint64_t> seen;
  int counts[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 50000; ++i) {
    const auto v = rng.uniform_int(5);
    REQUIRE(v < 5);
    seen.insert(v);
    counts[v] += 1;
  }
  CHECK(seen.size() == 5);
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("normal has mean 0 variance 1") {
  Rng rng(13);
  double s = 0.0, ss = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  CHECK(std::abs(s / n) < 0.02);
  CHECK(std::abs(ss / n - 1.0) < 0.03);
}

TEST_CASE("gamma matches its mean and handles shape below one") {
  Rng rng(17);
  for (double shape : {0.3, 0.5, 1.0, 2.5}) {
    double s = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape);
      REQUIRE(g >= 0.0);
      s += g;
    }
    CHECK(std::abs(s / n - shape) < 0.05 * std::max(1.0, shape));
  }
}

TEST_CASE("dirichlet rows sum to one") {
  Rng rng(19);
  for (int rep = 0; rep < 100; ++rep) {
    const auto v = rng.dirichlet(0.5, 25);
    double s = 0.0;
    for (double x : v) {
      REQUIRE(x >= 0.0);
      s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("poisson matches its mean") {
  Rng rng(23);
  double s = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) s += rng.poisson(2.0);
  CHECK(std::abs(s / n - 2.0) < 0.05);
}

TEST_CASE("permutation is a permutation") {
  Rng rng(29);
  const auto p = rng.permutation(100);
  std::set<std::size_t> seen(p.begin(), p.end());
  CHECK(seen.size() == 100);
  CHECK(*seen.rbegin() == 99);
}
