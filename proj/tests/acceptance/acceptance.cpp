#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "kacchain/chain.hpp"
#include "kacchain/error.hpp"
#include "kacchain/experiment.hpp"
#include "kacchain/hydro.hpp"
#include "kacchain/kernel.hpp"
#include "kacchain/meanfield.hpp"
#include "kacchain/quadrature.hpp"
#include "kacchain/transport.hpp"

using namespace kac;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAILED]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}
std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}
std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

ChainState random_state(int N, int d, RandomStream& rng) {
  ChainState s = ChainState::zeros(N, d);
  for (auto& x : s.X) x = rng.normal();
  for (auto& v : s.V) v = rng.normal();
  return s;
}

InitialCondition cosine_profile(int d = 1) {
  InitialCondition ic;
  ic.T = {1.0, 0.5, 1};
  ic.d = d;
  return ic;
}

// 1. Exchanges on a frozen chain conserve the Hamiltonian.
Outcome criterion1() {
  constexpr double kTol = 1e-12;
  constexpr long kSwaps = 1000000;
  Outcome o;
  const auto b = KernelProfile::smooth_bump();
  const auto pot = PotentialSpec::harmonic(1.0);
  const int N = 1024;
  KacKernel k(b, b, 0.25, N);
  ModelParams mp;
  mp.N = N;
  mp.ell = 0.25;
  mp.d = 2;
  RandomStream rng(101);
  ChainState s = sample_chain(cosine_profile(2), N, rng);
  const double H0 = hamiltonian(s, k, pot);
  double worst = 0.0, identity = 0.0;
  for (long e = 1; e <= kSwaps; ++e) {
    apply_exchange(s, next_exchange(k, mp, rng).event);
    if (e % 100000 == 0) {
      const double H = hamiltonian(s, k, pot);
      worst = std::max(worst, std::abs(H - H0) / std::abs(H0));
      const auto E = site_energies(s, k, pot);
      const double sum = std::accumulate(E.begin(), E.end(), 0.0);
      identity = std::max(identity, std::abs(sum - H) / std::abs(H));
    }
  }
  o.require(worst <= kTol, fmt("max relative |H - H0| = %.3g over 1e6 swaps (tol %.0e)", worst, kTol));
  o.require(identity <= kTol, fmt("max relative |sum E^i - H| = %.3g", identity));
  return o;
}

// 2. Velocity-Verlet energy drift and its second-order scaling.
Outcome criterion2() {
  constexpr double kDriftTol = 1e-6;
  constexpr double kRatioLo = 3.0, kRatioHi = 5.0;
  Outcome o;
  const auto b = KernelProfile::smooth_bump();
  const auto pot = PotentialSpec::harmonic(1.0);
  const int N = 1024;
  KacKernel k(b, b, 0.25, N);
  RandomStream init(202);
  const ChainState s0 = sample_chain(cosine_profile(), N, init);
  ChainRunOptions opt;
  for (int q = 0; q <= 100; ++q) opt.sample_times.push_back(0.1 * q);
  double drift[2];
  const double dts[2] = {1e-3, 2e-3};
  for (int h = 0; h < 2; ++h) {
    ModelParams mp;
    mp.N = N;
    mp.ell = 0.25;
    mp.gamma_bar = 0.0;
    mp.dt_max = dts[h];
    RandomStream rng(203);
    drift[h] = simulate_chain(mp, k, pot, s0, 10.0, opt, rng).energy_drift;
  }
  o.require(drift[0] <= kDriftTol, fmt("drift at dt = 1e-3: %.3g (tol %.0e)", drift[0], kDriftTol));
  const double ratio = drift[1] / drift[0];
  o.require(ratio >= kRatioLo && ratio <= kRatioHi,
            fmt("drift(2e-3)/drift(1e-3) = %.3f (band [%.0f, %.0f])", ratio, kRatioLo, kRatioHi));
  return o;
}

// 3. Convolution and naive force paths agree.
Outcome criterion3() {
  constexpr double kTol = 1e-10;
  Outcome o;
  const auto b = KernelProfile::smooth_bump();
  const auto pot = PotentialSpec::harmonic(1.3);
  RandomStream rng(303);
  const int Ns[] = {64, 100, 256, 500, 1024};
  const double ells[] = {0.05, 0.1, 0.25, 0.4};
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int N = Ns[t % 5];
    const double ell = std::max(ells[(t / 5) % 4], 1.0 / N);
    const int d = 1 + t % 3;
    KacKernel k(b, b, ell, N);
    const ChainState s = random_state(N, d, rng);
    const auto a = compute_forces(s, k, pot, ForceMethod::Naive);
    const auto c = compute_forces(s, k, pot, ForceMethod::Convolution);
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - c[i]));
  }
  o.require(worst <= kTol, fmt("max |F_conv - F_naive| = %.3g over 100 states (tol %.0e)", worst, kTol));
  return o;
}

// 4. Exchange process: lag law, waiting times and Poisson counts.
Outcome criterion4() {
  constexpr double kPMin = 0.001;
  constexpr double kSe = 3.0;
  constexpr double kDispLo = 0.9, kDispHi = 1.1;
  constexpr int kEvents = 1000000;
  constexpr int kReplicas = 2000;
  Outcome o;
  const auto b = KernelProfile::smooth_bump();
  const int N = 1024;
  KacKernel k(b, b, 0.1, N);
  ModelParams mp;
  mp.N = N;
  mp.ell = 0.1;
  mp.gamma_bar = 1.0;
  const double Lambda = mp.gamma_bar * N * k.gamma_positive_sum();

  RandomStream rng(404);
  const int L = k.max_lag();
  std::vector<double> hist(L + 1, 0.0);
  double wsum = 0.0, wsq = 0.0;
  for (int e = 0; e < kEvents; ++e) {
    const auto nx = next_exchange(k, mp, rng);
    wsum += nx.wait;
    wsq += nx.wait * nx.wait;
    const int lag = ((nx.event.j - nx.event.i) % N + N) % N;
    if (lag >= 1 && lag <= L) hist[lag] += 1.0;
  }
  double chi2 = 0.0;
  int bins = 0;
  for (int j = 1; j <= L; ++j) {
    const double expct = kEvents * k.gamma_k(j) / k.gamma_positive_sum();
    if (expct < 5.0) continue;
    chi2 += (hist[j] - expct) * (hist[j] - expct) / expct;
    ++bins;
  }
  const double p =
      boost::math::cdf(boost::math::complement(boost::math::chi_squared(bins - 1), chi2));
  o.require(p > kPMin, fmt("lag chi2 = %.1f on %.0f dof, p = %.3g", chi2, bins - 1.0, p));

  const double wmean = wsum / kEvents;
  const double wse = std::sqrt((wsq / kEvents - wmean * wmean) / kEvents);
  o.require(std::abs(wmean - 1.0 / Lambda) <= kSe * wse,
            fmt("mean wait %.6g vs 1/Lambda %.6g (SE %.2g)", wmean, 1.0 / Lambda, wse));

  const double window = 0.1;
  std::vector<double> counts(kReplicas);
  for (int r = 0; r < kReplicas; ++r) {
    RandomStream rr = RandomStream::for_replica(405, r);
    double t = 0.0;
    int c = 0;
    while (true) {
      t += next_exchange(k, mp, rr).wait;
      if (t > window) break;
      ++c;
    }
    counts[r] = c;
  }
  const double cm = std::accumulate(counts.begin(), counts.end(), 0.0) / kReplicas;
  double cv = 0.0;
  for (double c : counts) cv += (c - cm) * (c - cm);
  cv /= kReplicas - 1;
  const double disp = cv / cm;
  o.require(disp >= kDispLo && disp <= kDispHi,
            fmt("count variance/mean = %.3f (mean %.1f, expected %.1f)", disp, cm, Lambda * window));
  return o;
}

DiscreteMeasure random_uniform(int n, int dim, bool torus, RandomStream& rng) {
  std::vector<double> c(n * dim);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < dim; ++j) c[k * dim + j] = (torus && j == 0) ? rng.uniform() : rng.normal();
  }
  return DiscreteMeasure::uniform(dim, c, torus);
}

double brute_force_w1(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const int n = static_cast<int>(a.size());
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  double best = 1e300;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += ground_distance(a.atom(i), b.atom(p[i]), a.dim, a.torus_first);
    best = std::min(best, s / n);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// W1 on the line as the integral of |F_a - F_b|.
double quantile_w1(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < a.size(); ++k) pts.push_back({a.coords[k], a.weights[k]});
  for (std::size_t k = 0; k < b.size(); ++k) pts.push_back({b.coords[k], -b.weights[k]});
  std::sort(pts.begin(), pts.end());
  double F = 0.0, total = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    F += pts[k].second;
    total += std::abs(F) * (pts[k + 1].first - pts[k].first);
  }
  return total;
}

EmpiricalMeasure random_boxed(int J, int per_box, double spread, RandomStream& rng) {
  EmpiricalMeasure m;
  m.d = 1;
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < per_box; ++k) {
      m.r.push_back((j + rng.uniform()) / J);
      m.x.push_back(spread * rng.normal());
      m.v.push_back(spread * rng.normal());
    }
  }
  return m;
}

// 5. Transport oracles.
Outcome criterion5() {
  constexpr double kTol = 1e-10;
  Outcome o;
  RandomStream rng(505);

  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 6;
    const auto a = random_uniform(n, 3, true, rng), b = random_uniform(n, 3, true, rng);
    worst = std::max(worst, std::abs(w1_matching(a, b).cost - brute_force_w1(a, b)));
  }
  o.require(worst <= kTol, fmt("matching vs permutations: max error %.3g", worst));

  worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    DiscreteMeasure a, b;
    const int na = 1 + t % 9, nb = 1 + (t * 7) % 11;
    for (int k = 0; k < na; ++k) {
      a.coords.push_back(rng.normal());
      a.weights.push_back(rng.uniform());
    }
    for (int k = 0; k < nb; ++k) {
      b.coords.push_back(1.5 * rng.normal());
      b.weights.push_back(rng.uniform());
    }
    const double sa = std::accumulate(a.weights.begin(), a.weights.end(), 0.0);
    const double sb = std::accumulate(b.weights.begin(), b.weights.end(), 0.0);
    for (double& w : a.weights) w /= sa;
    for (double& w : b.weights) w /= sb;
    worst = std::max(worst, std::abs(w1_general(a, b).cost - quantile_w1(a, b)));
  }
  o.require(worst <= kTol, fmt("1-d general W1 vs quantile formula: max error %.3g", worst));

  int dominated = 0;
  for (int t = 0; t < 50; ++t) {
    const int J = 1 + t % 4, per = 2 + t % 5;
    const auto m1 = random_boxed(J, per, 1.0, rng);
    const auto m2 = random_boxed(J, per, 1.0 + 0.1 * (t % 3), rng);
    double exact = 0.0;
    for (int j = 0; j < J; ++j) {
      std::vector<double> ca, cb;
      for (std::size_t k = 0; k < m1.size(); ++k) {
        if (std::min(J - 1, static_cast<int>(std::ceil(m1.r[k] * J) - 1)) == j) {
          ca.insert(ca.end(), {m1.r[k], m1.x[k], m1.v[k]});
        }
      }
      for (std::size_t k = 0; k < m2.size(); ++k) {
        if (std::min(J - 1, static_cast<int>(std::ceil(m2.r[k] * J) - 1)) == j) {
          cb.insert(cb.end(), {m2.r[k], m2.x[k], m2.v[k]});
        }
      }
      exact += w1_matching(DiscreteMeasure::uniform(3, ca, true), DiscreteMeasure::uniform(3, cb, true)).cost / J;
    }
    const double M = 1.0 + (t % 3);
    if (w1_box_bound(m1, m2, 1.0 / J, M, 1 + t % 4) >= exact) ++dominated;
  }
  o.require(dominated == 50, fmt("box bound >= exact boxwise W1 on %.0f/50 instances", dominated));

  dominated = 0;
  for (int t = 0; t < 50; ++t) {
    const int J = 1 + t % 5;
    const auto m1 = random_boxed(J, 4, 1.0, rng), m2 = random_boxed(J, 4, 1.2, rng);
    const double plain =
        w1_matching(DiscreteMeasure::from_empirical(m1), DiscreteMeasure::from_empirical(m2)).cost;
    if (sliced_w1(m1, m2, BoxPartition::with_boxes(4 * J, J)) >= plain - 1e-12) ++dominated;
  }
  o.require(dominated == 50, fmt("sliced W1 >= plain W1 on %.0f/50 instances", dominated));
  return o;
}

// 6. Coupling map: cost identity and pushforward.
Outcome criterion6() {
  constexpr double kCostTol = 1e-10;
  constexpr double kPushTol = 1e-12;
  Outcome o;
  RandomStream rng(606);
  double cost_err = 0.0, push_err = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int lags = 2 + t % 9, atoms = 1 + t % 6, d = 1 + t % 3;
    std::vector<double> g(lags);
    double s = 0.0;
    for (double& x : g) s += (x = rng.uniform());
    for (double& x : g) x /= s;
    std::vector<std::vector<double>> v(lags, std::vector<double>(d));
    for (auto& row : v) {
      for (double& x : row) x = rng.normal();
    }
    DiscreteMeasure target;
    target.dim = d;
    double ts = 0.0;
    for (int a = 0; a < atoms; ++a) {
      for (int c = 0; c < d; ++c) target.coords.push_back(rng.normal());
      target.weights.push_back(rng.uniform());
      ts += target.weights.back();
    }
    for (double& x : target.weights) x /= ts;
    const PiMap pm = build_pi_map(64 + 37 * t, g, v, target);
    cost_err = std::max(cost_err, std::abs(pm.interval_cost() - pm.plan_cost()));
    const auto push = pm.pushforward();
    for (int a = 0; a < atoms; ++a) push_err = std::max(push_err, std::abs(push[a] - target.weights[a]));
  }
  o.require(cost_err <= kCostTol, fmt("random instances: max cost identity error %.3g", cost_err));
  o.require(push_err <= kPushTol, fmt("random instances: max pushforward error %.3g", push_err));

  CouplingSuiteParams p;
  p.instances = 50;
  cost_err = push_err = 0.0;
  for (const auto& inst : coupling_suite(p)) {
    cost_err = std::max(cost_err, inst.cost_error);
    push_err = std::max(push_err, inst.pushforward_error);
  }
  o.require(cost_err <= kCostTol && push_err <= kPushTol,
            fmt("chain instances: cost error %.3g, pushforward error %.3g", cost_err, push_err));
  return o;
}

// 7. Spectral heat solver.
Outcome criterion7() {
  constexpr double kModeTol = 1e-10;
  constexpr double kMassTol = 1e-12;
  Outcome o;
  const int n = 512;
  double worst = 0.0;
  for (double D : {0.001, 0.0099, 0.05}) {
    for (double t : {0.05, 0.1, 0.2, 1.0}) {
      for (int m : {0, 1, 2, 3, 7, 20}) {
        std::vector<double> e0(n);
        for (int j = 0; j < n; ++j) e0[j] = std::cos(2 * kPi * m * j / n) + std::sin(2 * kPi * m * j / n);
        const auto h = heat_solve(e0, D, t);
        const double f = std::exp(-D * std::pow(2 * kPi * m, 2) * t);
        for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(h.values[j] - f * e0[j]));
      }
    }
  }
  o.require(worst <= kModeTol, fmt("max per-mode decay error %.3g", worst));

  RandomStream rng(707);
  std::vector<double> e(n);
  for (auto& v : e) v = 1.0 + rng.uniform();
  HeatProfile h0;
  h0.values = e;
  double mass = 0.0;
  for (double t : {0.01, 0.1, 1.0, 100.0}) {
    mass = std::max(mass, std::abs(heat_solve(e, 0.02, t).integral() - h0.integral()));
  }
  o.require(mass <= kMassTol, fmt("max mass change %.3g", mass));
  return o;
}

// 8. Kernel second moments.
Outcome criterion8() {
  constexpr double kExactTol = 1e-15;
  constexpr double kHalvingTol = 1e-10;
  // 30-digit evaluation of (1/2) int u^2 C exp(-1/(1-4u^2)) du.
  constexpr double kBumpMoment = 0.0197642045329747787785063035199;
  Outcome o;
  const double cu = profile_moment(KernelProfile::uniform_test());
  o.require(std::abs(cu - 1.0 / 24.0) <= kExactTol, fmt("uniform c = %.17g vs 1/24", cu));

  const auto b = KernelProfile::smooth_bump();
  const auto f = [&](double u) { return u * u * b.value(u); };
  double prev = 0.0, change = 0.0;
  for (int levels = 12; levels <= 18; ++levels) {
    const double v = 0.5 * romberg(f, -0.5, 0.5, 0.0, levels).value;
    if (levels > 12) change = std::abs(v - prev);
    prev = v;
  }
  o.require(change <= kHalvingTol, fmt("bump moment change under the last step halving %.3g", change));
  const double cb = profile_moment(b);
  o.require(std::abs(cb - kBumpMoment) <= kHalvingTol,
            fmt("bump c = %.15g vs frozen %.15g", cb, kBumpMoment));
  return o;
}

// 9. Symmetry of odd moments and the energy-implied second-moment bound.
Outcome criterion9() {
  constexpr double kSe = 4.0;
  constexpr double kSlack = 1.1;
  Outcome o;
  const int M = 100000;
  const double ell = 0.1;
  const auto b = KernelProfile::smooth_bump();
  const CloudKernel k(b, b, ell);
  const auto pot = PotentialSpec::harmonic(1.0);
  RandomStream rng(909);
  const MeanFieldCloud c0 = init_cloud(cosine_profile(), M, 1024, rng);

  // |x|^2 <= c U(x) with c = 2/a; W >= 0, so |z|^2 <= max(c, 2) e.
  const double growth = std::max(2.0 / pot.a(), 2.0);
  const auto e0 = cloud_energies(c0, k, pot);
  const double bound = growth * std::accumulate(e0.begin(), e0.end(), 0.0) / M;

  CloudEvolveOptions opt;
  opt.dt_max = 0.01;
  for (int q = 0; q <= 8; ++q) opt.snapshot_times.push_back(0.25 * q);
  const auto traj = evolve_cloud(c0, k, pot, 1.0, 2.0, opt, rng);

  double worst_z = 0.0, sup_z2 = 0.0;
  for (const auto& c : traj.snapshots) {
    const std::vector<std::function<double(double, double)>> odd{
        [](double x, double) { return x; },          [](double, double v) { return v; },
        [](double x, double) { return x * x * x; },  [](double, double v) { return v * v * v; },
        [](double x, double v) { return x * x * v; }, [](double x, double v) { return x * v * v; }};
    for (const auto& f : odd) {
      double s = 0.0, s2 = 0.0;
      for (int m = 0; m < M; ++m) {
        const double y = f(c.x[m], c.v[m]);
        s += y;
        s2 += y * y;
      }
      const double mean = s / M;
      const double se = std::sqrt((s2 / M - mean * mean) / M);
      worst_z = std::max(worst_z, std::abs(mean) / se);
    }
    double z2 = 0.0;
    for (int m = 0; m < M; ++m) z2 += c.x[m] * c.x[m] + c.v[m] * c.v[m];
    sup_z2 = std::max(sup_z2, z2 / M);
  }
  o.require(worst_z <= kSe, fmt("max |odd moment|/SE over 9 snapshots = %.2f (limit %.0f)", worst_z, kSe));
  o.require(sup_z2 <= kSlack * bound, fmt("sup mean|z|^2 = %.4f vs bound %.4f", sup_z2, bound));
  return o;
}

// 10. Generator residual of the nonlinear martingale problem.
Outcome criterion10() {
  constexpr double kSe = 3.0;
  constexpr double kDelta = 1e-2;
  Outcome o;
  const int M = 100000;
  const auto b = KernelProfile::smooth_bump();
  const CloudKernel k(b, b, 0.1);
  const auto pot = PotentialSpec::harmonic(1.0);
  RandomStream rng(1010);
  const MeanFieldCloud c0 = init_cloud(cosine_profile(), M, 1024, rng);
  CloudEvolveOptions opt;
  opt.dt_max = 0.0025;
  opt.snapshot_times = {0.5, 0.5 + kDelta};
  const auto traj = evolve_cloud(c0, k, pot, 1.0, 0.5 + kDelta, opt, rng);
  const auto basket = generator_basket(3.0);
  const auto res = generator_residual(traj.snapshots[0], traj.snapshots[1], basket, k, pot, 1.0);
  for (const auto& s : res) {
    const bool ok = s.name == "one" ? s.mean == 0.0 : std::abs(s.mean) <= kSe * s.se;
    o.require(ok, s.name + fmt(": %.3g (SE %.2g)", s.mean, s.se));
  }
  return o;
}

// 11. Picard contraction.
Outcome criterion11() {
  Outcome o;
  const int M = 50000;
  const auto b = KernelProfile::smooth_bump();
  const CloudKernel k(b, b, 0.2);
  const auto pot = PotentialSpec::harmonic(1.0);
  RandomStream rng(1111);
  const MeanFieldCloud c0 = init_cloud(cosine_profile(), M, 1024, rng);
  const auto rep = picard_iterate(c0, k, pot, 1.0, 0.1, 0.01, 4, 10, 1112);
  for (std::size_t n = 0; n < rep.ratios.size(); ++n) {
    o.require(rep.ratios[n] < 1.0, "iteration " + std::to_string(n + 2) + fmt(" ratio %.4g", rep.ratios[n]));
  }
  o.require(rep.ratios.size() == 3, "three ratios");
  return o;
}

// 12. Chain versus mean-field cloud convergence in N.
Outcome criterion12() {
  constexpr double kSigmas = 2.0;
  Outcome o;
  ConvergenceParams p;
  p.Ns = {256, 1024, 4096};
  p.ell = 0.1;
  p.gamma_bar = 1.0;
  p.d = 1;
  p.times = {1.0};
  p.replicas = 8;
  p.reference_M = 100000;
  const auto r = convergence_experiment(p);
  std::string table;
  for (int N : p.Ns) {
    const auto& pt = r.at(N, 1.0);
    table += fmt("N = %.0f: %.4f +- %.4f, ", N, pt.sliced_mean, pt.sliced_se);
  }
  o.require(r.non_increasing(kSigmas), table + "non-increasing within 2 SE");
  return o;
}

// 13. Energy diffusion at the desk scale.
Outcome criterion13() {
  constexpr double kRateTol = 0.25;
  Outcome o;
  DiffusionReport rep[2];
  const double ells[2] = {0.1, 0.2};
  for (int q = 0; q < 2; ++q) {
    DiffusionParams p;
    p.N = 20000;
    p.ell = ells[q];
    p.gamma_bar = 1.0;
    p.times = {0.05, 0.1, 0.2};
    p.replicas = 4;
    p.seed = 1313;
    rep[q] = diffusion_experiment(p);
  }
  for (std::size_t i = 0; i < rep[0].times.size(); ++i) {
    const double t = rep[0].times[i].t;
    if (t == 0.0) continue;
    const double a = rep[0].times[i].l1_error, b = rep[1].times[i].l1_error;
    o.require(a < b, fmt("t = %.2f: L1 %.4f (ell 0.1) vs %.4f (ell 0.2)", t, a, b));
  }
  const double rate = rep[0].fitted_rate, expected = rep[0].expected_rate;
  o.require(std::isfinite(rate) && std::abs(rate - expected) <= kRateTol * expected,
            fmt("fitted rate %.4f vs %.4f at ell 0.1 (ell 0.2: %.4f)", rate, expected, rep[1].fitted_rate));
  return o;
}

// 14. Equipartition and Hamiltonian-current residuals scale like ell^2.
Outcome criterion14() {
  constexpr double kLo = 2.5, kHi = 6.0;
  Outcome o;
  EquipartitionReport rep[2];
  const double ells[2] = {0.2, 0.1};
  for (int q = 0; q < 2; ++q) {
    EquipartitionParams p;
    p.M = 8000000;
    p.ell = ells[q];
    p.gamma_bar = 1.0;
    p.t = 0.1;
    p.seed = 1414;
    rep[q] = equipartition_experiment(p);
  }
  const double eq = rep[0].equipartition.value / rep[1].equipartition.value;
  o.require(eq >= kLo && eq <= kHi,
            fmt("equipartition ratio %.3f (%.3g / %.3g)", eq, rep[0].equipartition.value,
                rep[1].equipartition.value) +
                fmt(" SEs %.2g, %.2g", rep[0].equipartition.se, rep[1].equipartition.se));
  const double hc = rep[0].hamiltonian_current.value / rep[1].hamiltonian_current.value;
  o.require(hc >= kLo && hc <= kHi,
            fmt("hamiltonian current ratio %.3f (%.3g / %.3g)", hc, rep[0].hamiltonian_current.value,
                rep[1].hamiltonian_current.value) +
                fmt(" SEs %.2g, %.2g", rep[0].hamiltonian_current.se, rep[1].hamiltonian_current.se));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criterion numbers (default: all)")->check(CLI::Range(1, 14));
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) {
    for (int c = 1; c <= 14; ++c) which.push_back(c);
  }
  set_warnings_enabled(false);
  const std::vector<Outcome (*)()> table{criterion1,  criterion2,  criterion3,  criterion4,
                                         criterion5,  criterion6,  criterion7,  criterion8,
                                         criterion9,  criterion10, criterion11, criterion12,
                                         criterion13, criterion14};
  int failed = 0;
  for (int c : which) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = table[c - 1]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s (%.1f s) %s\n", c, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
