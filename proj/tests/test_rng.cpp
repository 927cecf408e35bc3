#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "cimrel/rng.hpp"

using namespace cimrel;

TEST_SUITE("rng") {

TEST_CASE("same seed, same stream") {
  Rng a(123), b(123), c(124);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
}

TEST_CASE("stream seeds are distinct per index and master") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 20; ++m) {
    for (std::uint64_t i = 0; i < 500; ++i) seen.insert(stream_seed(m, i));
  }
  CHECK(seen.size() == 20 * 500);
}

TEST_CASE("uniform lies in [0, 1) and has mean 1/2") {
  Rng r(5);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("uniform_index covers the range evenly") {
  Rng r(8);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[r.uniform_index(7)];
  const double p = 1.0 / 7.0;
  for (int c : counts) CHECK(std::abs(c - n * p) < 4.0 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("normal has unit variance") {
  Rng r(9);
  const int n = 400000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
  }
  CHECK(std::abs(s1 / n) < 3.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

}  // TEST_SUITE
