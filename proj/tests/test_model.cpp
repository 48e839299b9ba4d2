#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kacchain/error.hpp"
#include "kacchain/model.hpp"

using namespace kac;

TEST_CASE("box partition index map and tiling") {
  const BoxPartition p(64, 1.0 / 8.0);
  CHECK(p.boxes() == 8);
  CHECK(p.sites_per_box() == 8);
  for (int s = 0; s < 64; ++s) {
    const int i = s + 1;  // 1-based site index
    const int expected = static_cast<int>(std::ceil(i / (64.0 / 8.0))) - 1;
    CHECK(p.box_of_site(s) == expected);
    CHECK(p.box_of_r(static_cast<double>(i) / 64.0) == expected);
    // every r in B_j is within eps of i/N
    const double lo = expected * p.eps(), hi = (expected + 1) * p.eps();
    CHECK(std::max(std::abs(i / 64.0 - lo), std::abs(i / 64.0 - hi)) <= p.eps() + 1e-15);
  }
  CHECK(p.box_of_r(0.0) == 7);
  CHECK(p.box_of_r(1.0 / 8.0) == 0);
  CHECK(p.box_of_r(1.0 / 8.0 + 1e-6) == 1);
  CHECK_THROWS_AS(BoxPartition(100, 1.0 / 12.0), InvalidArgument);
  CHECK_THROWS_AS(validate_eps(1.0 / 4.0, 64, 0.2), InvalidArgument);
  CHECK(validate_eps(1.0 / 8.0, 64, 0.2) == 8);
}

TEST_CASE("convergence schedule snaps to divisors") {
  CHECK(convergence_eps(0.1, 256, 1) ==
        doctest::Approx(std::pow(0.1, 0.8) * std::pow(256.0, -0.2)));
  CHECK(snap_box_count(convergence_eps(0.1, 256, 1), 256, 0.1) == 16);
  CHECK(snap_box_count(convergence_eps(0.1, 1024, 1), 1024, 0.1) == 32);
  CHECK(snap_box_count(convergence_eps(0.1, 4096, 1), 4096, 0.1) == 32);
}

TEST_CASE("params validation") {
  ModelParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.step_cap() == doctest::Approx(0.01));
  p.ell = 0.05;
  CHECK(p.step_cap() == doctest::Approx(0.005));
  p.N = 10;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("local Gibbs energy at constant temperature") {
  InitialCondition ic;
  ic.T.T0 = 1.7;
  RandomStream rng(11);
  const auto s = sample_initial(ic, 100000, RAssignment::Uniform, rng);
  double se = 0, see = 0, sx = 0, sxx = 0, sv = 0, svv = 0;
  const double n = 100000;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double e = 0.5 * s.v[i] * s.v[i] + 0.5 * s.x[i] * s.x[i] + 0.5 * s.x[i] * s.x[i];
    se += e;
    see += e * e;
    sx += s.x[i];
    sxx += s.x[i] * s.x[i];
    sv += s.v[i];
    svv += s.v[i] * s.v[i];
  }
  const auto sem = [n](double a, double b) { return std::sqrt((b / n - a * a / n / n) / n); };
  CHECK(std::abs(se / n - 1.7) < 3.0 * sem(se, see));
  CHECK(std::abs(sx / n) < 3.0 * sem(sx, sxx));
  CHECK(std::abs(sv / n) < 3.0 * sem(sv, svv));
}

TEST_CASE("binned energy follows d*T(r)") {
  InitialCondition ic;
  ic.T = {1.0, 0.5, 1};
  ic.d = 2;
  RandomStream rng(12);
  const std::size_t n = 200000;
  const auto s = sample_initial(ic, n, RAssignment::Uniform, rng);
  const int G = 16;
  std::vector<double> sum(G), sumsq(G), ref(G), cnt(G);
  for (std::size_t i = 0; i < n; ++i) {
    const int g = std::min(G - 1, static_cast<int>(s.r[i] * G));
    double e = 0;
    for (int c = 0; c < 2; ++c) e += 0.5 * s.v[2 * i + c] * s.v[2 * i + c] + s.x[2 * i + c] * s.x[2 * i + c];
    // subtract the per-sample expectation so the residual has mean zero
    e -= 2.0 * ic.T(s.r[i]);
    sum[g] += e;
    sumsq[g] += e * e;
    cnt[g] += 1;
  }
  int outside = 0;
  for (int g = 0; g < G; ++g) {
    const double m = sum[g] / cnt[g];
    const double se = std::sqrt((sumsq[g] / cnt[g] - m * m) / cnt[g]);
    if (std::abs(m) > 3.0 * se) ++outside;
  }
  // 16 bins at 3 sigma: expect 0.04 exceedances
  CHECK(outside <= 1);
}

TEST_CASE("anharmonic rejection sampler and self-test") {
  InitialCondition ic;
  ic.d = 2;
  ic.potentials = PotentialSpec::homogeneous(1.0, 0.5);
  RandomStream rng(13);
  const auto t = sampler_self_test(ic, 100000, 1.0, rng);
  CHECK(t.passed);
  CHECK(t.energy_z < 4.0);
  InitialCondition h;
  RandomStream rng2(14);
  CHECK(sampler_self_test(h, 100000, 1.0, rng2).passed);
}

TEST_CASE("uniform-in-box assignment keeps boxes exact") {
  InitialCondition ic;
  const BoxPartition p(64, 1.0 / 8.0);
  RandomStream rng(15);
  const auto s = sample_initial(ic, 64, RAssignment::UniformInBox, rng, &p);
  std::vector<int> counts(8);
  for (double r : s.r) ++counts[p.box_of_r(r)];
  for (int c : counts) CHECK(c == 8);
}
