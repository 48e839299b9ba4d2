#include "kacchain/hydro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "fft_convolver.hpp"
#include "kacchain/error.hpp"
#include "kacchain/parallel.hpp"

namespace kac {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct BinStats {
  std::vector<double> sum, sumsq;
  std::vector<std::size_t> count;
  explicit BinStats(int G) : sum(G, 0.0), sumsq(G, 0.0), count(G, 0) {}
  void add(int g, double e) {
    sum[g] += e;
    sumsq[g] += e * e;
    ++count[g];
  }
};

EnergyProfile finish_profile(const BinStats& st, int G, ProfileSource source) {
  EnergyProfile p;
  p.grid_G = G;
  p.source = source;
  p.centers.resize(G);
  p.mean.assign(G, 0.0);
  p.se.assign(G, 0.0);
  p.mass.assign(G, 0.0);
  for (int g = 0; g < G; ++g) {
    p.centers[g] = (g + 0.5) / G;
    p.population += st.count[g];
    p.total += st.sum[g];
  }
  if (p.population == 0) throw InvalidArgument("energy profile of an empty population");
  bool merged = false;
  for (int g = 0; g < G; ++g) {
    const double n = static_cast<double>(st.count[g]);
    if (n == 0) continue;
    p.mass[g] = n / static_cast<double>(p.population);
    p.mean[g] = st.sum[g] / n;
    if (n > 1) {
      const double var = std::max(0.0, (st.sumsq[g] - n * p.mean[g] * p.mean[g]) / (n - 1.0));
      p.se[g] = std::sqrt(var / n);
    }
  }
  for (int g = 0; g < G; ++g) {
    if (st.count[g] != 0) continue;
    merged = true;
    for (int k = 1; k < G; ++k) {
      const int h = (g + k) % G;
      if (st.count[h] != 0) {
        p.mean[g] = p.mean[h];
        p.se[g] = p.se[h];
        break;
      }
    }
  }
  if (merged) log_warning("empty energy-profile bins merged with their right neighbour");
  return p;
}

void require_harmonic_pair(const PotentialSpec& pot) {
  if (!pot.harmonic_pair()) {
    throw UnsupportedMethod("energy decomposition and currents require a harmonic pair potential W");
  }
}

// (1/M) sum_{m'} Phi_ell(rho - rho_{m'}) f_{m'} at every sample.
std::vector<double> smoothed_field(const MeanFieldCloud& c, const CloudKernel& kernel,
                                   const std::vector<double>& field) {
  std::vector<double> out(c.M);
  if (kernel.phi_profile().kind() == ProfileKind::SmoothBump) {
    const KernelSmoother sm(kernel.phi_profile(), kernel.ell(), c.grid_G);
    const auto nodes = sm.nodes(c.rho, field.data(), 1);
    for (int m = 0; m < c.M; ++m) sm.interpolate(nodes, 1, c.rho[m], &out[m]);
    return out;
  }
  for (int m = 0; m < c.M; ++m) {
    double s = 0.0;
    for (const auto& [b, e] : rho_window(c.rho, c.rho[m], 0.5 * kernel.ell())) {
      for (int q = b; q < e; ++q) s += kernel.Phi(c.rho[m] - c.rho[q]) * field[q];
    }
    out[m] = s / c.M;
  }
  return out;
}

}  // namespace

int profile_bin(double r, int G) {
  const double y = torus_reduce(r);
  int g = static_cast<int>(std::ceil(y * G - 1e-9)) - 1;
  if (g < 0) g = G - 1;
  if (g >= G) g = G - 1;
  return g;
}

double EnergyProfile::weighted_mean() const {
  double s = 0.0;
  for (int g = 0; g < grid_G; ++g) s += mass[g] * mean[g];
  return s;
}

EnergyProfile energy_profile(const ChainState& state, const KacKernel& kernel,
                             const PotentialSpec& potentials, int grid_G) {
  if (grid_G < 1 || grid_G > state.N) throw InvalidArgument("grid_G must lie in [1, N]");
  require_harmonic_pair(potentials);
  const auto E = site_energies(state, kernel, potentials);
  BinStats st(grid_G);
  for (int s = 0; s < state.N; ++s) st.add(profile_bin(state.r(s), grid_G), E[s]);
  return finish_profile(st, grid_G, ProfileSource::Chain);
}

std::vector<double> cloud_energies(const MeanFieldCloud& cloud, const CloudKernel& kernel,
                                   const PotentialSpec& potentials) {
  require_harmonic_pair(potentials);
  const int d = cloud.d;
  std::vector<double> x2(cloud.M);
  for (int m = 0; m < cloud.M; ++m) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += cloud.x[static_cast<std::size_t>(m) * d + c] *
                                     cloud.x[static_cast<std::size_t>(m) * d + c];
    x2[m] = s;
  }
  const auto S2 = smoothed_field(cloud, kernel, x2);
  std::vector<double> e(cloud.M);
  for (int m = 0; m < cloud.M; ++m) {
    const double* x = &cloud.x[static_cast<std::size_t>(m) * d];
    const double* v = &cloud.v[static_cast<std::size_t>(m) * d];
    double v2 = 0.0;
    for (int c = 0; c < d; ++c) v2 += v[c] * v[c];
    e[m] = 0.5 * v2 + 0.25 * x2[m] + 0.25 * S2[m] + potentials.U(x, d);
  }
  return e;
}

EnergyProfile energy_profile(const MeanFieldCloud& cloud, const CloudKernel& kernel,
                             const PotentialSpec& potentials, int grid_G) {
  if (grid_G < 1 || grid_G > cloud.M) throw InvalidArgument("grid_G must lie in [1, M]");
  const auto e = cloud_energies(cloud, kernel, potentials);
  BinStats st(grid_G);
  for (int m = 0; m < cloud.M; ++m) st.add(profile_bin(cloud.rho[m], grid_G), e[m]);
  return finish_profile(st, grid_G, ProfileSource::Cloud);
}

CurrentField currents_from_moments(const std::vector<double>& m_xv,
                                   const std::vector<double>& m_xv_se,
                                   const std::vector<double>& kappa,
                                   const std::vector<double>& kappa_se, const CloudKernel* kernel) {
  const int G = static_cast<int>(m_xv.size());
  if (G < 1 || kappa.size() != m_xv.size() || m_xv_se.size() != m_xv.size() ||
      kappa_se.size() != m_xv.size()) {
    throw InvalidArgument("current moments must have one entry per bin");
  }
  CurrentField f;
  f.grid_G = G;
  const std::size_t n = static_cast<std::size_t>(G) * G;
  f.j_a.resize(n);
  f.j_s.resize(n);
  f.j_a_se.resize(n);
  f.j_s_se.resize(n);
  f.net_a.assign(G, 0.0);
  f.net_s.assign(G, 0.0);
  for (int g = 0; g < G; ++g) {
    for (int h = 0; h < G; ++h) {
      const std::size_t k = static_cast<std::size_t>(g) * G + h;
      f.j_a[k] = 0.5 * (m_xv[g] - m_xv[h]);
      f.j_s[k] = kappa[g] - kappa[h];
      f.j_a_se[k] = 0.5 * std::hypot(m_xv_se[g], m_xv_se[h]);
      f.j_s_se[k] = std::hypot(kappa_se[g], kappa_se[h]);
      if (kernel != nullptr) {
        const double u = static_cast<double>(h - g) / G;
        f.net_a[g] += kernel->Phi(u) * f.j_a[k] / G;
        f.net_s[g] += kernel->Gamma(u) * f.j_s[k] / G;
      }
    }
  }
  return f;
}

CurrentField energy_currents(const MeanFieldCloud& cloud, const CloudKernel& kernel,
                             const PotentialSpec& potentials, int grid_G) {
  require_harmonic_pair(potentials);
  if (grid_G < 1 || grid_G > cloud.M) throw InvalidArgument("grid_G must lie in [1, M]");
  const int d = cloud.d;
  BinStats xv(grid_G), kin(grid_G);
  for (int m = 0; m < cloud.M; ++m) {
    const double* x = &cloud.x[static_cast<std::size_t>(m) * d];
    const double* v = &cloud.v[static_cast<std::size_t>(m) * d];
    double a = 0.0, k = 0.0;
    for (int c = 0; c < d; ++c) {
      a += x[c] * v[c];
      k += 0.5 * v[c] * v[c];
    }
    const int g = profile_bin(cloud.rho[m], grid_G);
    xv.add(g, a);
    kin.add(g, k);
  }
  const auto pa = finish_profile(xv, grid_G, ProfileSource::Cloud);
  const auto pk = finish_profile(kin, grid_G, ProfileSource::Cloud);
  return currents_from_moments(pa.mean, pa.se, pk.mean, pk.se, &kernel);
}

double HeatProfile::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / static_cast<double>(values.size());
}

HeatProfile heat_solve(const std::vector<double>& e0, double D, double t) {
  if (e0.empty()) throw InvalidArgument("heat_solve needs a nonempty grid");
  if (!(D >= 0.0) || !(t >= 0.0)) throw InvalidArgument("heat_solve needs D >= 0 and t >= 0");
  const int n = static_cast<int>(e0.size());
  std::vector<double> mult(n / 2 + 1);
  for (int m = 0; m <= n / 2; ++m) mult[m] = std::exp(-D * (kTwoPi * m) * (kTwoPi * m) * t);
  FftConvolver conv(n, mult);
  HeatProfile h;
  h.D = D;
  h.t = t;
  h.values.resize(n);
  conv.apply(e0.data(), 1, h.values.data(), 1);
  return h;
}

TestProfile test_zero() {
  return {"zero", [](double) { return 0.0; }, [](double) { return 0.0; }};
}

TestProfile test_constant() {
  return {"one", [](double) { return 1.0; }, [](double) { return 0.0; }};
}

TestProfile test_cos(int mode) {
  const double w = kTwoPi * mode;
  return {"cos" + std::to_string(mode), [w](double r) { return std::cos(w * r); },
          [w](double r) { return -w * w * std::cos(w * r); }};
}

TestProfile test_sin(int mode) {
  const double w = kTwoPi * mode;
  return {"sin" + std::to_string(mode), [w](double r) { return std::sin(w * r); },
          [w](double r) { return -w * w * std::sin(w * r); }};
}

DiffusiveRecorder::DiffusiveRecorder(const CloudKernel& kernel, const PotentialSpec& potentials,
                                     double ell, TestProfile G, TestProfile g)
    : kernel_(kernel), potentials_(potentials), ell_(ell), G_(std::move(G)), g_(std::move(g)) {
  require_harmonic_pair(potentials);
  if (!(ell > 0.0)) throw InvalidArgument("ell must be positive");
}

void DiffusiveRecorder::observe(const MeanFieldCloud& cloud) {
  const int d = cloud.d;
  const double s = cloud.t * ell_ * ell_;
  if (count_ > 0) {
    if (static_cast<std::size_t>(cloud.M) != acc_eq_.size()) {
      throw InvalidArgument("recorder observed clouds of different sizes");
    }
    if (!(s > s_last_)) throw InvalidArgument("recorder observations must advance in time");
  }
  const auto e = cloud_energies(cloud, kernel_, potentials_);
  std::vector<double> feq(cloud.M), fhc(cloud.M);
  for (int m = 0; m < cloud.M; ++m) {
    const double* x = &cloud.x[static_cast<std::size_t>(m) * d];
    const double* v = &cloud.v[static_cast<std::size_t>(m) * d];
    double v2 = 0.0, xv = 0.0;
    for (int c = 0; c < d; ++c) {
      v2 += v[c] * v[c];
      xv += x[c] * v[c];
    }
    feq[m] = G_.g(cloud.rho[m]) * (0.5 * v2 - 0.5 * e[m]);
    fhc[m] = 0.5 * xv * g_.g2(cloud.rho[m]);
  }
  if (count_ == 0) {
    s_first_ = s;
    acc_eq_.assign(cloud.M, 0.0);
    acc_hc_.assign(cloud.M, 0.0);
  } else {
    const double h = 0.5 * (s - s_last_);
    for (int m = 0; m < cloud.M; ++m) {
      acc_eq_[m] += h * (prev_eq_[m] + feq[m]);
      acc_hc_[m] += h * (prev_hc_[m] + fhc[m]);
    }
  }
  prev_eq_ = std::move(feq);
  prev_hc_ = std::move(fhc);
  s_last_ = s;
  ++count_;
}

namespace {
ScaledIntegral mean_se(const std::vector<double>& a) {
  ScaledIntegral r;
  if (a.empty()) return r;
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a) s += v;
  r.value = s / n;
  double ss = 0.0;
  for (double v : a) ss += (v - r.value) * (v - r.value);
  if (a.size() > 1) r.se = std::sqrt(ss / (n - 1.0) / n);
  return r;
}

void feed(DiffusiveRecorder& rec, const std::vector<MeanFieldCloud>& traj, double t, double ell) {
  if (traj.empty()) throw InvalidArgument("empty trajectory");
  const double s0 = traj.front().t * ell * ell;
  const double tol = 1e-9 * std::max(1.0, t);
  for (const auto& c : traj) {
    if (c.t * ell * ell - s0 > t + tol) break;
    rec.observe(c);
  }
  if (rec.scaled_time() < t - tol) {
    throw InvalidArgument("trajectory does not reach the requested scaled time");
  }
}
}  // namespace

ScaledIntegral DiffusiveRecorder::equipartition() const { return mean_se(acc_eq_); }
ScaledIntegral DiffusiveRecorder::hamiltonian_current() const { return mean_se(acc_hc_); }

ScaledIntegral equipartition_residual(const std::vector<MeanFieldCloud>& trajectory,
                                      const TestProfile& G, double t, double ell,
                                      const CloudKernel& kernel, const PotentialSpec& potentials) {
  DiffusiveRecorder rec(kernel, potentials, ell, G, test_zero());
  feed(rec, trajectory, t, ell);
  return rec.equipartition();
}

ScaledIntegral hamiltonian_current_check(const std::vector<MeanFieldCloud>& trajectory,
                                         const TestProfile& g, double t, double ell,
                                         const CloudKernel& kernel,
                                         const PotentialSpec& potentials) {
  DiffusiveRecorder rec(kernel, potentials, ell, test_zero(), g);
  feed(rec, trajectory, t, ell);
  return rec.hamiltonian_current();
}

void DiffusionParams::validate() const {
  if (N < 1) throw InvalidArgument("N must be positive");
  if (!(ell > 0.0 && ell < 1.0)) throw InvalidArgument("ell must lie in (0, 1)");
  if (!(gamma_bar >= 0.0)) throw InvalidArgument("gamma_bar must be nonnegative");
  if (d < 1) throw InvalidArgument("d must be positive");
  T.validate();
  require_harmonic_pair(potentials);
  if (!potentials.harmonic_pinning() && d == 1) {
    throw InvalidArgument("anharmonic pinning needs d >= 2");
  }
  for (double t : times) {
    if (!(t >= 0.0)) throw InvalidArgument("diffusion times must be nonnegative");
  }
  if (replicas < 1) throw InvalidArgument("replicas must be positive");
  if (grid_G < 1 || grid_G > N) throw InvalidArgument("grid_G must lie in [1, N]");
  if (engine == DiffusionEngine::Cloud && cloud_M != 0 && cloud_M < cloud_grid) {
    throw InvalidArgument("cloud_M must be at least cloud_grid");
  }
}

std::pair<double, int> fit_decay_rate(const std::vector<double>& t, const std::vector<double>& a,
                                      const std::vector<double>& se) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (a[i] > 5.0 * se[i] && a[i] > 0.0) {
      xs.push_back(t[i]);
      ys.push_back(std::log(a[i]));
    }
  }
  const int n = static_cast<int>(xs.size());
  if (n < 2) return {std::numeric_limits<double>::quiet_NaN(), n};
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) return {std::numeric_limits<double>::quiet_NaN(), n};
  return {-sxy / sxx, n};
}

namespace {

struct ReplicaTimeData {
  std::vector<double> mean, se, mass;
  std::vector<double> tested, tested_se;
  double amplitude = 0.0, amplitude_se = 0.0;
};

struct ReplicaData {
  std::vector<ReplicaTimeData> times;
  double drift = 0.0;
  std::uint64_t events = 0;
};

ReplicaTimeData summarize(const std::vector<double>& r, const std::vector<double>& e, int G,
                          const std::vector<TestProfile>& basket, int mode) {
  ReplicaTimeData out;
  BinStats st(G);
  const std::size_t n = e.size();
  for (std::size_t i = 0; i < n; ++i) st.add(profile_bin(r[i], G), e[i]);
  const auto p = finish_profile(st, G, ProfileSource::Chain);
  out.mean = p.mean;
  out.se = p.se;
  out.mass = p.mass;
  auto proj = [&](const std::function<double(double)>& g, double scale, double& val,
                  double& err) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = scale * e[i] * g(r[i]);
      s += q;
      ss += q * q;
    }
    const double dn = static_cast<double>(n);
    val = s / dn;
    err = std::sqrt(std::max(0.0, ss / dn - val * val) / dn);
  };
  for (const auto& b : basket) {
    double v, s;
    proj(b.g, 1.0, v, s);
    out.tested.push_back(v);
    out.tested_se.push_back(s);
  }
  const double w = kTwoPi * mode;
  proj([w](double x) { return std::cos(w * x); }, 2.0, out.amplitude, out.amplitude_se);
  return out;
}

}  // namespace

DiffusionReport diffusion_experiment(const DiffusionParams& p) {
  p.validate();
  std::vector<double> times = p.times;
  times.push_back(0.0);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const double inv_l2 = 1.0 / (p.ell * p.ell);
  const double horizon = times.back() * inv_l2;
  std::vector<double> phys(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) phys[j] = times[j] * inv_l2;

  const auto phi = KernelProfile::smooth_bump(p.phi_sharpness);
  const auto gam = KernelProfile::smooth_bump(p.gamma_sharpness);
  const int M = p.cloud_M > 0 ? p.cloud_M : p.N;

  DiffusionReport rep;
  rep.c_gamma = profile_moment(gam);
  rep.D = p.gamma_bar * rep.c_gamma / 2.0;
  rep.expected_rate = rep.D * std::pow(kTwoPi * p.T.mode, 2);

  std::vector<TestProfile> basket{test_constant(), test_cos(1), test_sin(1), test_cos(2)};
  InitialCondition ic;
  ic.T = p.T;
  ic.potentials = p.potentials;
  ic.d = p.d;

  ModelParams mp;
  mp.N = p.N;
  mp.ell = p.ell;
  mp.gamma_bar = p.gamma_bar;
  mp.d = p.d;
  mp.dt_max = p.dt_max;
  mp.seed = p.seed;
  mp.validate();

  std::unique_ptr<KacKernel> kernel;
  double expected_events;
  if (p.engine == DiffusionEngine::Chain) {
    kernel = std::make_unique<KacKernel>(phi, gam, p.ell, p.N);
    expected_events = p.gamma_bar * p.N * kernel->gamma_positive_sum() * horizon * p.replicas;
  } else {
    expected_events = 0.5 * p.gamma_bar * M * horizon * p.replicas;
  }
  if (expected_events > p.max_events) {
    throw BudgetExceeded("diffusion experiment needs about " + std::to_string(expected_events) +
                         " jump events, above the budget of " + std::to_string(p.max_events));
  }
  const CloudKernel ckernel(phi, gam, p.ell);

  std::vector<ReplicaData> data(p.replicas);
  parallel_for(p.replicas, p.workers, [&](std::size_t rep_index) {
    const RandomStream base = RandomStream::for_replica(p.seed, rep_index);
    RandomStream ic_rng = base.split(0x1c);
    RandomStream dyn_rng = base.split(0xd1);
    ReplicaData& out = data[rep_index];
    if (p.engine == DiffusionEngine::Chain) {
      ChainState s0 = sample_chain(ic, p.N, ic_rng);
      std::vector<double> r(p.N);
      for (int s = 0; s < p.N; ++s) r[s] = s0.r(s);
      ChainRunOptions opt;
      opt.sample_times = phys;
      opt.max_events = static_cast<std::uint64_t>(p.max_events);
      const ChainObserver obs = [&](const ChainState& st) {
        out.times.push_back(summarize(r, site_energies(st, *kernel, p.potentials), p.grid_G,
                                      basket, p.T.mode));
      };
      const auto res = simulate_chain(mp, *kernel, p.potentials, std::move(s0), horizon, opt,
                                      dyn_rng, {obs});
      out.drift = res.energy_drift;
      out.events = res.events;
    } else {
      MeanFieldCloud c = init_cloud(ic, M, p.cloud_grid, ic_rng);
      CloudEvolveOptions opt;
      opt.dt_max = mp.step_cap();
      opt.mode = JumpMode::Exchange;
      opt.snapshot_times = phys;
      opt.keep_snapshots = false;
      opt.max_events = static_cast<std::uint64_t>(p.max_events);
      const CloudObserver obs = [&](const MeanFieldCloud& cl) {
        out.times.push_back(summarize(cl.rho, cloud_energies(cl, ckernel, p.potentials),
                                      p.grid_G, basket, p.T.mode));
      };
      const auto traj = evolve_cloud(std::move(c), ckernel, p.potentials, p.gamma_bar, horizon,
                                     opt, dyn_rng, {obs});
      out.events = traj.events;
    }
  });

  // Heat reference on a fine grid, averaged over each bin.
  const int n_ref = p.engine == DiffusionEngine::Chain ? p.N : 64 * p.grid_G;
  std::vector<double> r_ref(n_ref), e0(n_ref);
  for (int j = 0; j < n_ref; ++j) {
    r_ref[j] = static_cast<double>(j + 1) / n_ref;
    e0[j] = local_gibbs_energy(ic, r_ref[j]);
  }
  const int G = p.grid_G;
  rep.centers.resize(G);
  for (int g = 0; g < G; ++g) rep.centers[g] = (g + 0.5) / G;
  const double R = p.replicas;
  for (const auto& d : data) {
    rep.energy_drift = std::max(rep.energy_drift, d.drift);
    rep.events += d.events;
  }
  std::vector<double> ts, amps, amp_se;
  for (std::size_t j = 0; j < times.size(); ++j) {
    DiffusionTimeReport tr;
    tr.t = times[j];
    const auto heat = heat_solve(e0, rep.D, times[j]);
    std::vector<double> ref_sum(G, 0.0);
    std::vector<int> ref_cnt(G, 0);
    for (int k = 0; k < n_ref; ++k) {
      const int g = profile_bin(r_ref[k], G);
      ref_sum[g] += heat.values[k];
      ++ref_cnt[g];
    }
    tr.reference.resize(G);
    for (int g = 0; g < G; ++g) tr.reference[g] = ref_cnt[g] ? ref_sum[g] / ref_cnt[g] : 0.0;

    auto pool = [&](auto get_val, auto get_se, std::size_t count, std::vector<double>& val,
                    std::vector<double>& se) {
      val.assign(count, 0.0);
      se.assign(count, 0.0);
      for (std::size_t k = 0; k < count; ++k) {
        double s = 0.0, ss = 0.0, se2 = 0.0;
        for (const auto& d : data) {
          const double v = get_val(d.times[j], k);
          s += v;
          ss += v * v;
          se2 += get_se(d.times[j], k) * get_se(d.times[j], k);
        }
        val[k] = s / R;
        if (p.replicas >= 2) {
          se[k] = std::sqrt(std::max(0.0, (ss - R * val[k] * val[k]) / (R - 1.0)) / R);
        } else {
          se[k] = std::sqrt(se2) / R;
        }
      }
    };
    pool([](const ReplicaTimeData& t, std::size_t k) { return t.mean[k]; },
         [](const ReplicaTimeData& t, std::size_t k) { return t.se[k]; }, G, tr.profile,
         tr.profile_se);
    std::vector<double> mass(G, 0.0);
    for (const auto& d : data) {
      for (int g = 0; g < G; ++g) mass[g] += d.times[j].mass[g] / R;
    }
    for (int g = 0; g < G; ++g) tr.l1_error += mass[g] * std::abs(tr.profile[g] - tr.reference[g]);

    pool([](const ReplicaTimeData& t, std::size_t k) { return t.tested[k]; },
         [](const ReplicaTimeData& t, std::size_t k) { return t.tested_se[k]; }, basket.size(),
         tr.tested_measured, tr.tested_se);
    for (const auto& b : basket) {
      tr.tested_names.push_back(b.name);
      double s = 0.0;
      for (int k = 0; k < n_ref; ++k) s += heat.values[k] * b.g(r_ref[k]);
      tr.tested_reference.push_back(s / n_ref);
    }
    std::vector<double> a, ase;
    pool([](const ReplicaTimeData& t, std::size_t) { return t.amplitude; },
         [](const ReplicaTimeData& t, std::size_t) { return t.amplitude_se; }, 1, a, ase);
    tr.mode_amplitude = a[0];
    tr.mode_amplitude_se = ase[0];
    {
      const double w = kTwoPi * p.T.mode;
      double s = 0.0;
      for (int k = 0; k < n_ref; ++k) s += heat.values[k] * std::cos(w * r_ref[k]);
      tr.reference_amplitude = 2.0 * s / n_ref;
    }
    ts.push_back(tr.t);
    amps.push_back(tr.mode_amplitude);
    amp_se.push_back(tr.mode_amplitude_se);
    rep.times.push_back(std::move(tr));
  }
  const auto [rate, pts] = fit_decay_rate(ts, amps, amp_se);
  rep.fitted_rate = rate;
  rep.fit_points = pts;
  return rep;
}

EquipartitionReport equipartition_experiment(const EquipartitionParams& p) {
  if (!(p.t > 0.0)) throw InvalidArgument("scaled time must be positive");
  if (!(p.snapshot_spacing > 0.0)) throw InvalidArgument("snapshot spacing must be positive");
  InitialCondition ic;
  ic.T = p.T;
  ic.potentials = p.potentials;
  ic.d = p.d;
  const auto b = KernelProfile::smooth_bump();
  const CloudKernel kernel(b, b, p.ell);
  RandomStream base(p.seed);
  RandomStream ic_rng = base.split(0x1c);
  RandomStream dyn_rng = base.split(0xd1);
  MeanFieldCloud c = init_cloud(ic, p.M, p.grid_G, ic_rng);
  const double horizon = p.t / (p.ell * p.ell);
  const long n = static_cast<long>(std::ceil(horizon / p.snapshot_spacing * (1.0 - 1e-12)));
  CloudEvolveOptions opt;
  opt.dt_max = p.dt_max;
  opt.mode = JumpMode::Exchange;
  opt.keep_snapshots = false;
  for (long k = 0; k <= n; ++k) opt.snapshot_times.push_back(horizon * k / n);
  DiffusiveRecorder rec(kernel, p.potentials, p.ell, test_cos(1), test_cos(1));
  const CloudObserver obs = [&rec](const MeanFieldCloud& cl) { rec.observe(cl); };
  const auto traj =
      evolve_cloud(std::move(c), kernel, p.potentials, p.gamma_bar, horizon, opt, dyn_rng, {obs});
  EquipartitionReport r;
  r.equipartition = rec.equipartition();
  r.hamiltonian_current = rec.hamiltonian_current();
  r.events = traj.events;
  return r;
}

}  // namespace kac
