#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kacchain/error.hpp"
#include "kacchain/hydro.hpp"

using namespace kac;

namespace {

constexpr double kPi = std::numbers::pi;

MeanFieldCloud gibbs_cloud(int M, double T0, double amp, std::uint64_t seed, int G = 1024) {
  InitialCondition ic;
  ic.T = {T0, amp, 1};
  RandomStream rng(seed);
  return init_cloud(ic, M, G, rng);
}

CloudKernel bump(double ell) {
  const auto b = KernelProfile::smooth_bump();
  return CloudKernel(b, b, ell);
}

}  // namespace

TEST_CASE("heat solver decays each Fourier mode analytically") {
  const int n = 256;
  const double D = 0.013, t = 0.37;
  for (int m : {0, 1, 2, 5, 17}) {
    std::vector<double> e0(n);
    for (int j = 0; j < n; ++j) e0[j] = std::cos(2 * kPi * m * j / n);
    const auto h = heat_solve(e0, D, t);
    const double f = std::exp(-D * std::pow(2 * kPi * m, 2) * t);
    double err = 0;
    for (int j = 0; j < n; ++j) err = std::max(err, std::abs(h.values[j] - f * e0[j]));
    CHECK(err <= 1e-10);
  }
  std::vector<double> c(n, 2.5);
  const auto hc = heat_solve(c, 0.3, 10.0);
  for (double v : hc.values) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));

  RandomStream rng(3);
  std::vector<double> e(n);
  for (auto& v : e) v = rng.uniform();
  HeatProfile h0;
  h0.values = e;
  for (double tt : {0.0, 0.01, 1.0, 50.0}) {
    CHECK(std::abs(heat_solve(e, 0.05, tt).integral() - h0.integral()) <= 1e-12);
  }
  CHECK_THROWS_AS(heat_solve(e, -1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(heat_solve({}, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("profile bins are half-open on the left") {
  CHECK(profile_bin(1.0 / 64, 64) == 0);
  CHECK(profile_bin(1.0, 64) == 63);
  CHECK(profile_bin(0.0, 64) == 63);
  CHECK(profile_bin(0.5 + 1e-6, 64) == 32);
  CHECK(profile_bin(0.5, 64) == 31);
}

TEST_CASE("chain energy profile: partition identity and flatness") {
  const auto b = KernelProfile::smooth_bump();
  const int N = 8192;
  KacKernel k(b, b, 0.1, N);
  InitialCondition ic;
  RandomStream rng(4);
  const ChainState s = sample_chain(ic, N, rng);
  const auto p = energy_profile(s, k, ic.potentials, 32);
  CHECK(p.population == static_cast<std::size_t>(N));
  CHECK(std::abs(p.weighted_mean() - p.total / N) <= 1e-12 * std::abs(p.total / N));
  const double global = p.total / N;
  for (int g = 0; g < 32; ++g) CHECK(std::abs(p.mean[g] - global) <= 4.0 * p.se[g]);

  auto soft = PotentialSpec::harmonic(1.0);
  soft.with_soft_pair();
  CHECK_THROWS_AS(energy_profile(s, k, soft, 32), UnsupportedMethod);
}

TEST_CASE("cloud energy profile follows d T(r) at t = 0") {
  const auto c = gibbs_cloud(200000, 1.0, 0.5, 5);
  const auto k = bump(0.1);
  const int G = 16;
  const auto p = energy_profile(c, k, PotentialSpec::harmonic(1.0), G);
  CHECK(std::abs(p.weighted_mean() - p.total / c.M) <= 1e-12 * std::abs(p.total / c.M));
  for (int g = 0; g < G; ++g) {
    // Bin average of 1 + cos(2 pi r)/2 over ((g)/G, (g+1)/G].
    const double a = static_cast<double>(g) / G, bnd = static_cast<double>(g + 1) / G;
    const double avg = 1.0 + 0.5 * (std::sin(2 * kPi * bnd) - std::sin(2 * kPi * a)) /
                                 (2 * kPi * (bnd - a));
    CHECK(std::abs(p.mean[g] - avg) <= 3.0 * p.se[g]);
  }
}

TEST_CASE("empty profile bins merge with a neighbour") {
  MeanFieldCloud c;
  c.M = 4;
  c.d = 1;
  c.grid_G = 8;
  c.rho = {0.1, 0.15, 0.6, 0.7};
  c.x = {0.1, 0.2, 0.3, 0.4};
  c.v = {1.0, 1.0, 2.0, 2.0};
  const auto p = energy_profile(c, bump(0.2), PotentialSpec::harmonic(1.0), 4);
  CHECK(p.mass[1] == 0.0);
  CHECK(p.mean[1] == p.mean[2]);
  CHECK(std::abs(p.weighted_mean() - p.total / 4) <= 1e-12);
}

TEST_CASE("energy currents: definitions and symmetric stationary cloud") {
  const auto f = currents_from_moments({0.3, -0.1}, {0.01, 0.02}, {1.25, 0.75}, {0.0, 0.0},
                                       nullptr);
  CHECK(f.s(0, 1) == 1.25 - 0.75);
  CHECK(f.s(1, 0) == 0.75 - 1.25);
  CHECK(f.a(0, 1) == 0.5 * (0.3 - -0.1));

  const auto c = gibbs_cloud(100000, 1.0, 0.0, 6);
  const auto cur = energy_currents(c, bump(0.2), PotentialSpec::harmonic(1.0), 8);
  for (int g = 0; g < 8; ++g) {
    for (int h = 0; h < 8; ++h) {
      CHECK(cur.a(g, h) == -cur.a(h, g));
      CHECK(cur.s(g, h) == -cur.s(h, g));
      const std::size_t k = static_cast<std::size_t>(g) * 8 + h;
      CHECK(std::abs(cur.j_a[k]) <= 4.0 * cur.j_a_se[k] + 1e-300);
      CHECK(std::abs(cur.j_s[k]) <= 4.0 * cur.j_s_se[k] + 1e-300);
    }
  }
}

TEST_CASE("diffusive recorder: trivial and equilibrium cases") {
  const auto k = bump(0.2);
  const auto pot = PotentialSpec::harmonic(1.0);
  const double ell = 0.2;
  const auto c = gibbs_cloud(20000, 1.0, 0.0, 7, 512);
  CloudEvolveOptions opt;
  opt.dt_max = 0.01;
  for (int i = 0; i <= 40; ++i) opt.snapshot_times.push_back(0.05 * i);
  RandomStream rng(8);
  const auto traj = evolve_cloud(c, k, pot, 1.0, 2.0, opt, rng);
  const double t = 2.0 * ell * ell;

  const auto zero = equipartition_residual(traj.snapshots, test_zero(), t, ell, k, pot);
  CHECK(zero.value == 0.0);
  const auto lin = hamiltonian_current_check(traj.snapshots, test_constant(), t, ell, k, pot);
  CHECK(lin.value == 0.0);

  const auto eq = equipartition_residual(traj.snapshots, test_cos(1), t, ell, k, pot);
  CHECK(std::abs(eq.value) <= 4.0 * eq.se);
  const auto hc = hamiltonian_current_check(traj.snapshots, test_cos(1), t, ell, k, pot);
  CHECK(std::abs(hc.value) <= 4.0 * hc.se);

  CHECK_THROWS_AS(equipartition_residual(traj.snapshots, test_cos(1), 2 * t, ell, k, pot),
                  InvalidArgument);
}

TEST_CASE("decay-rate fit") {
  std::vector<double> t{0.0, 0.05, 0.1, 0.2}, a, se(4, 0.001);
  for (double x : t) a.push_back(0.5 * std::exp(-0.39 * x));
  const auto [rate, n] = fit_decay_rate(t, a, se);
  CHECK(n == 4);
  CHECK(rate == doctest::Approx(0.39).epsilon(1e-12));
  se[3] = 1.0;
  CHECK(fit_decay_rate(t, a, se).second == 3);
  se.assign(4, 1.0);
  CHECK(std::isnan(fit_decay_rate(t, a, se).first));
}

TEST_CASE("diffusion experiment at small scale") {
  DiffusionParams p;
  p.N = 2000;
  p.ell = 0.2;
  p.times = {0.004};
  p.grid_G = 16;
  p.replicas = 2;
  const auto r = diffusion_experiment(p);
  REQUIRE(r.times.size() == 2);
  CHECK(r.c_gamma == doctest::Approx(0.0197642045329747787785063035199).epsilon(1e-10));
  CHECK(r.D == doctest::Approx(r.c_gamma / 2));
  const auto& t0 = r.times[0];
  CHECK(t0.t == 0.0);
  for (std::size_t i = 0; i < t0.tested_names.size(); ++i) {
    CHECK(std::abs(t0.tested_measured[i] - t0.tested_reference[i]) <= 4.0 * t0.tested_se[i] + 0.01);
  }
  CHECK(r.energy_drift < 1e-6);

  const auto again = diffusion_experiment(p);
  CHECK(again.times[1].profile == r.times[1].profile);

  DiffusionParams frozen = p;
  frozen.gamma_bar = 0.0;
  const auto fr = diffusion_experiment(frozen);
  CHECK(fr.D == 0.0);
  CHECK(fr.times[1].reference == fr.times[0].reference);

  DiffusionParams big = p;
  big.max_events = 10;
  CHECK_THROWS_AS(diffusion_experiment(big), BudgetExceeded);

  DiffusionParams bad = p;
  bad.potentials = PotentialSpec::homogeneous(1.0, 0.3);
  CHECK_THROWS_AS(diffusion_experiment(bad), InvalidArgument);
}
