#include <cmath>
#include <set>

#include "doctest.h"
#include "kacchain/rng.hpp"

using namespace kac;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using C = std::array<std::uint32_t, 4>;
  using K = std::array<std::uint32_t, 2>;
  CHECK(philox4x32_10(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      K{0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      K{0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and replica streams differ") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RandomStream r0 = RandomStream::for_replica(7, 0), r1 = RandomStream::for_replica(7, 1);
  CHECK(r0.key() != r1.key());
  CHECK(r0.next_u64() != r1.next_u64());
  CHECK(RandomStream(5).split(1).key() != RandomStream(5).split(2).key());
}

TEST_CASE("uniform, normal and exponential moments") {
  RandomStream rng(123);
  const int n = 200000;
  double su = 0, sn = 0, snn = 0, se = 0;
  bool open_interval = true;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    open_interval = open_interval && u > 0.0 && u < 1.0;
    su += u;
    const double z = rng.normal();
    sn += z;
    snn += z * z;
    se += rng.exponential(2.0);
  }
  CHECK(open_interval);
  CHECK(std::abs(su / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sn / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(snn / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(se / n - 0.5) < 4.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("below covers its range without bias") {
  RandomStream rng(9);
  std::array<int, 7> counts{};
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.below(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(std::abs(c - n / 7.0) < 4.0 * std::sqrt(n / 7.0));
}
