#include "kacchain/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kacchain/error.hpp"

namespace kac {

CloudKernel::CloudKernel(KernelProfile phi, KernelProfile gamma, double ell)
    : phi_(std::move(phi)), gamma_(std::move(gamma)), ell_(ell) {
  if (!(ell > 0.0 && ell < 1.0)) throw InvalidArgument("ell must lie in (0, 1)");
}

CloudKernel CloudKernel::from(const KacKernel& k) {
  return CloudKernel(k.profile_phi(), k.profile_gamma(), k.ell());
}

double CloudKernel::Phi(double r) const { return phi_.value(torus_signed(r) / ell_) / ell_; }
double CloudKernel::Gamma(double r) const { return gamma_.value(torus_signed(r) / ell_) / ell_; }

EmpiricalMeasure MeanFieldCloud::as_measure() const {
  EmpiricalMeasure m;
  m.d = d;
  m.r = rho;
  m.x = x;
  m.v = v;
  return m;
}

double MeanFieldCloud::kinetic_sum() const {
  double s = 0.0;
  for (double q : v) s += 0.5 * q * q;
  return s;
}

MeanFieldCloud init_cloud(const InitialCondition& ic, int M, int grid_G, RandomStream& rng) {
  if (M < 1) throw InvalidArgument("cloud size M must be positive");
  if (grid_G < 1 || M < grid_G) throw InvalidArgument("cloud needs M >= grid_G >= 1");
  MeanFieldCloud c;
  c.M = M;
  c.d = ic.d;
  c.grid_G = grid_G;
  c.rho.resize(M);
  c.x.resize(static_cast<std::size_t>(M) * ic.d);
  c.v.resize(static_cast<std::size_t>(M) * ic.d);
  LocalGibbsSampler sampler(ic);
  for (int m = 0; m < M; ++m) {
    c.rho[m] = (m + rng.uniform()) / M;
    sampler.draw(c.rho[m], rng, &c.x[static_cast<std::size_t>(m) * ic.d],
                 &c.v[static_cast<std::size_t>(m) * ic.d]);
  }
  return c;
}

std::vector<std::pair<int, int>> rho_window(const std::vector<double>& rho, double center,
                                            double half) {
  const int M = static_cast<int>(rho.size());
  if (half >= 0.5) return {{0, M}};
  const double c = torus_reduce(center);
  const double lo = c - half, hi = c + half;
  auto lb = [&](double a) {
    return static_cast<int>(std::lower_bound(rho.begin(), rho.end(), a) - rho.begin());
  };
  auto ub = [&](double a) {
    return static_cast<int>(std::upper_bound(rho.begin(), rho.end(), a) - rho.begin());
  };
  std::vector<std::pair<int, int>> out;
  if (lo < 0.0) {
    out.push_back({lb(lo + 1.0), M});
    out.push_back({0, ub(hi)});
  } else if (hi >= 1.0) {
    out.push_back({lb(lo), M});
    out.push_back({0, ub(hi - 1.0)});
  } else {
    out.push_back({lb(lo), ub(hi)});
  }
  return out;
}

KernelSmoother::KernelSmoother(const KernelProfile& profile, double ell, int G)
    : profile_(profile), ell_(ell), G_(G) {
  if (G < 8) throw InvalidArgument("smoothing grid needs at least 8 nodes");
  if (profile.kind() != ProfileKind::SmoothBump) {
    throw UnsupportedMethod("binned kernel sums need a smooth profile");
  }
  lag_ = static_cast<int>(std::ceil(0.5 * ell * G)) + 1;
  if (2 * lag_ + 1 > G) throw InvalidArgument("smoothing grid too coarse for ell");
  K0_.resize(2 * lag_ + 1);
  K1_.resize(2 * lag_ + 1);
  K2_.resize(2 * lag_ + 1);
  for (int l = -lag_; l <= lag_; ++l) {
    const double u = static_cast<double>(l) / G / ell;
    K0_[l + lag_] = profile_.value(u) / ell;
    K1_[l + lag_] = profile_.derivative(u) / (ell * ell);
    K2_[l + lag_] = profile_.second_derivative(u) / (ell * ell * ell);
  }
}

std::vector<double> KernelSmoother::nodes(const std::vector<double>& rho, const double* fields,
                                          int k) const {
  const std::size_t n = rho.size();
  std::vector<double> W0(static_cast<std::size_t>(G_) * k), W1(W0.size()), W2(W0.size());
  for (std::size_t m = 0; m < n; ++m) {
    const double r = torus_reduce(rho[m]);
    const int g = bin_of(r);
    const double delta = r - center(g);
    const double* f = fields + m * k;
    const std::size_t off = static_cast<std::size_t>(g) * k;
    for (int c = 0; c < k; ++c) {
      W0[off + c] += f[c];
      W1[off + c] += delta * f[c];
      W2[off + c] += delta * delta * f[c];
    }
  }
  return convolve(W0, W1, W2, k, n);
}

std::vector<double> KernelSmoother::convolve(const std::vector<double>& W0,
                                             const std::vector<double>& W1,
                                             const std::vector<double>& W2, int k,
                                             std::size_t count) const {
  const std::size_t n = static_cast<std::size_t>(G_) * k;
  std::vector<double> out(n, 0.0);
  double* o = out.data();
  const double* p0 = W0.data();
  const double* p1 = W1.data();
  const double* p2 = W2.data();
  // out[g] += K(l) W[g - l] over flat indices, split where g - l wraps.
  for (int l = -lag_; l <= lag_; ++l) {
    const double a = K0_[l + lag_], b = -K1_[l + lag_], c2 = 0.5 * K2_[l + lag_];
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(((l % G_) + G_) % G_) * k;
    const std::size_t split = static_cast<std::size_t>(shift);
    for (std::size_t i = 0; i < split; ++i) {
      const std::size_t j = i + n - split;
      o[i] += a * p0[j] + b * p1[j] + c2 * p2[j];
    }
    for (std::size_t i = split; i < n; ++i) {
      const std::size_t j = i - split;
      o[i] += a * p0[j] + b * p1[j] + c2 * p2[j];
    }
  }
  const double inv = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
  for (std::size_t i = 0; i < n; ++i) o[i] *= inv;
  return out;
}

void KernelSmoother::interpolate(const std::vector<double>& node_values, int k, double r,
                                 double* out) const {
  if (r < 0.0 || r >= 1.0) r = torus_reduce(r);
  const double s = r * G_ - 0.5;
  int g0 = static_cast<int>(s + 1.0) - 1;
  const double w = s - g0;
  int g1 = g0 + 1;
  if (g0 < 0) g0 += G_;
  if (g1 >= G_) g1 -= G_;
  const double* a = &node_values[static_cast<std::size_t>(g0) * k];
  const double* b = &node_values[static_cast<std::size_t>(g1) * k];
  for (int c = 0; c < k; ++c) out[c] = (1.0 - w) * a[c] + w * b[c];
}

namespace {

void exact_force(const MeanFieldCloud& target, const MeanFieldCloud& source,
                 const CloudKernel& kernel, const PotentialSpec& pot, std::vector<double>& acc) {
  const int d = target.d;
  const double inv = 1.0 / source.M;
  std::vector<double> diff(d), g(d), sum(d);
  for (int m = 0; m < target.M; ++m) {
    const double r = target.rho[m];
    const double* x = &target.x[static_cast<std::size_t>(m) * d];
    std::fill(sum.begin(), sum.end(), 0.0);
    for (const auto& [b, e] : rho_window(source.rho, r, 0.5 * kernel.ell())) {
      for (int q = b; q < e; ++q) {
        const double w = kernel.Phi(r - source.rho[q]);
        if (w == 0.0) continue;
        const double* y = &source.x[static_cast<std::size_t>(q) * d];
        for (int c = 0; c < d; ++c) diff[c] = x[c] - y[c];
        pot.grad_W(diff.data(), d, g.data());
        for (int c = 0; c < d; ++c) sum[c] += w * g[c];
      }
    }
    pot.grad_U(x, d, g.data());
    double* a = &acc[static_cast<std::size_t>(m) * d];
    for (int c = 0; c < d; ++c) a[c] = -(sum[c] * inv + g[c]);
  }
}

template <int D>
void binned_force_d(const MeanFieldCloud& target, const MeanFieldCloud& source,
                    const KernelSmoother& sm, const PotentialSpec& pot, double* acc) {
  const int d = D > 0 ? D : target.d;
  const int k = d + 1;
  const int G = sm.grid();
  const std::size_t nk = static_cast<std::size_t>(G) * k;
  std::vector<double> W0(nk, 0.0), W1(nk, 0.0), W2(nk, 0.0);
  double* w0 = W0.data();
  double* w1 = W1.data();
  double* w2 = W2.data();
  const double* rho = source.rho.data();
  const double* xs = source.x.data();
  const double dG = G;
  // rho is sorted, so runs of equal bins accumulate in registers.
  constexpr int kMax = D > 0 ? D + 1 : 17;
  if (k > kMax) throw InvalidArgument("binned force supports d <= 16");
  double a0[kMax] = {}, a1[kMax] = {}, a2[kMax] = {};
  int cur = -1;
  auto flush = [&]() {
    if (cur < 0) return;
    const std::size_t off = static_cast<std::size_t>(cur) * k;
    for (int c = 0; c < k; ++c) {
      w0[off + c] += a0[c];
      w1[off + c] += a1[c];
      w2[off + c] += a2[c];
      a0[c] = a1[c] = a2[c] = 0.0;
    }
  };
  for (int q = 0; q < source.M; ++q) {
    double r = rho[q];
    if (r < 0.0 || r >= 1.0) r = torus_reduce(r);
    int g = static_cast<int>(r * dG);
    if (g >= G) g = G - 1;
    if (g != cur) {
      flush();
      cur = g;
    }
    const double delta = r - (g + 0.5) / dG;
    const double dd = delta * delta;
    a0[0] += 1.0;
    a1[0] += delta;
    a2[0] += dd;
    const double* x = xs + static_cast<std::size_t>(q) * d;
    for (int c = 0; c < d; ++c) {
      a0[1 + c] += x[c];
      a1[1 + c] += delta * x[c];
      a2[1 + c] += dd * x[c];
    }
  }
  flush();
  const std::vector<double> nodes = sm.convolve(W0, W1, W2, k, source.M);
  const double* nv = nodes.data();
  const bool harmonic_pin = pot.harmonic_pinning();
  const double a_pin = pot.a();
  std::vector<double> gu(d);
  const double* xt = target.x.data();
  const double* rt = target.rho.data();
  for (int m = 0; m < target.M; ++m) {
    double r = rt[m];
    if (r < 0.0 || r >= 1.0) r = torus_reduce(r);
    const double s = r * dG - 0.5;
    int g0 = static_cast<int>(s + 1.0) - 1;
    const double w = s - g0;
    int g1 = g0 + 1;
    if (g0 < 0) g0 += G;
    if (g1 >= G) g1 -= G;
    const double* na = nv + static_cast<std::size_t>(g0) * k;
    const double* nb = nv + static_cast<std::size_t>(g1) * k;
    const double s0 = na[0] + w * (nb[0] - na[0]);
    const double* x = xt + static_cast<std::size_t>(m) * d;
    double* a = acc + static_cast<std::size_t>(m) * d;
    if (!harmonic_pin) pot.grad_U(x, d, gu.data());
    for (int c = 0; c < d; ++c) {
      const double s1 = na[1 + c] + w * (nb[1 + c] - na[1 + c]);
      a[c] = -(s0 * x[c] - s1) - (harmonic_pin ? a_pin * x[c] : gu[c]);
    }
  }
}

void binned_force(const MeanFieldCloud& target, const MeanFieldCloud& source,
                  const CloudKernel& kernel, const PotentialSpec& pot, std::vector<double>& acc) {
  if (!pot.harmonic_pair()) {
    throw UnsupportedMethod("binned mean-field forces require a harmonic pair potential W");
  }
  const KernelSmoother sm(kernel.phi_profile(), kernel.ell(), source.grid_G);
  switch (target.d) {
    case 1:
      return binned_force_d<1>(target, source, sm, pot, acc.data());
    case 2:
      return binned_force_d<2>(target, source, sm, pot, acc.data());
    case 3:
      return binned_force_d<3>(target, source, sm, pot, acc.data());
    default:
      return binned_force_d<0>(target, source, sm, pot, acc.data());
  }
}

}  // namespace

std::vector<double> mf_force(const MeanFieldCloud& target, const MeanFieldCloud& source,
                             const CloudKernel& kernel, const PotentialSpec& potentials,
                             ForcePath path) {
  if (target.d != source.d) throw InvalidArgument("clouds have different dimensions");
  std::vector<double> acc(static_cast<std::size_t>(target.M) * target.d);
  if (path == ForcePath::Binned) {
    binned_force(target, source, kernel, potentials, acc);
  } else {
    exact_force(target, source, kernel, potentials, acc);
  }
  return acc;
}

std::vector<double> mf_force(const MeanFieldCloud& cloud, const CloudKernel& kernel,
                             const PotentialSpec& potentials, ForcePath path) {
  return mf_force(cloud, cloud, kernel, potentials, path);
}

int draw_partner(const MeanFieldCloud& source, const CloudKernel& kernel, double r,
                 RandomStream& rng) {
  const auto ranges = rho_window(source.rho, r, 0.5 * kernel.ell());
  long total = 0;
  for (const auto& [b, e] : ranges) total += e - b;
  if (total == 0) return -1;
  const double gmax = kernel.Gamma_max();
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    long k = static_cast<long>(rng.below(static_cast<std::uint64_t>(total)));
    int idx = -1;
    for (const auto& [b, e] : ranges) {
      if (k < e - b) {
        idx = b + static_cast<int>(k);
        break;
      }
      k -= e - b;
    }
    if (rng.uniform() * gmax < kernel.Gamma(r - source.rho[idx])) return idx;
  }
  return -1;
}

void mf_jump(MeanFieldCloud& cloud, int m, JumpMode mode, const MeanFieldCloud* reference,
             const CloudKernel& kernel, RandomStream& rng) {
  if (m < 0 || m >= cloud.M) throw InvalidArgument("sample index out of range");
  if (mode == JumpMode::Exchange && reference != nullptr) {
    throw InvalidArgument("exchange jumps act within the cloud itself");
  }
  const MeanFieldCloud& src = reference ? *reference : cloud;
  int p = draw_partner(src, kernel, cloud.rho[m], rng);
  if (p < 0) {
    log_warning("empty Gamma window at rho = " + std::to_string(cloud.rho[m]) +
                "; resampling from the sample itself");
    if (reference != nullptr) return;
    p = m;
  }
  const int d = cloud.d;
  double* vm = &cloud.v[static_cast<std::size_t>(m) * d];
  if (mode == JumpMode::Exchange) {
    double* vp = &cloud.v[static_cast<std::size_t>(p) * d];
    for (int c = 0; c < d; ++c) std::swap(vm[c], vp[c]);
  } else {
    const double* vp = &src.v[static_cast<std::size_t>(p) * d];
    for (int c = 0; c < d; ++c) vm[c] = vp[c];
  }
}

std::size_t PicardReference::index_at(double t) const {
  if (snapshots.empty()) throw InvalidArgument("empty Picard reference");
  std::size_t lo = 0;
  for (std::size_t s = 0; s < snapshots.size(); ++s) {
    if (snapshots[s].t <= t + 1e-12) lo = s;
  }
  return lo;
}

void PicardReference::validate() const {
  if (snapshots.empty()) throw InvalidArgument("empty Picard reference");
  for (std::size_t s = 1; s < snapshots.size(); ++s) {
    if (!(snapshots[s].t > snapshots[s - 1].t)) {
      throw InvalidArgument("Picard reference times must increase");
    }
  }
}

namespace {

CloudTrajectory evolve_impl(MeanFieldCloud cloud, const CloudKernel& kernel,
                            const PotentialSpec& pot, double gamma_bar, double horizon,
                            const CloudEvolveOptions& opt, RandomStream& rng,
                            const std::vector<CloudObserver>& observers,
                            const PicardReference* ref) {
  if (!(horizon >= 0.0)) throw InvalidArgument("horizon must be nonnegative");
  if (!(opt.dt_max > 0.0)) throw InvalidArgument("dt_max must be positive");
  if (!(gamma_bar >= 0.0)) throw InvalidArgument("gamma_bar must be nonnegative");
  const double t0 = cloud.t, t_end = t0 + horizon;
  JumpMode mode = opt.mode;
  if (ref != nullptr) {
    ref->validate();
    if (t_end > ref->horizon() + 1e-12 || t0 < ref->snapshots.front().t - 1e-12) {
      throw InvalidArgument("horizon exceeds the Picard reference grid");
    }
    mode = JumpMode::Resample;
  }
  std::vector<double> stops = opt.snapshot_times;
  std::sort(stops.begin(), stops.end());
  for (double s : stops) {
    if (s < t0 - 1e-12 || s > t_end + 1e-12) {
      throw InvalidArgument("snapshot time outside the evolution window");
    }
  }

  const int M = cloud.M, d = cloud.d;
  const std::size_t len = static_cast<std::size_t>(M) * d;
  RandomStream events = rng.split(1);
  const RandomStream partners = rng.split(2);
  const double rate = gamma_bar * M * (mode == JumpMode::Exchange ? 0.5 : 1.0);
  double next_event = rate > 0.0 ? t0 + events.exponential(rate)
                                 : std::numeric_limits<double>::infinity();
  CloudTrajectory traj;
  bool warned = false;

  auto source_at = [&](double t) -> const MeanFieldCloud& {
    return ref ? ref->snapshots[ref->index_at(t)] : cloud;
  };
  auto accel = [&](double t) { return mf_force(cloud, source_at(t), kernel, pot, opt.path); };
  auto emit = [&]() {
    for (const auto& o : observers) o(cloud);
    if (opt.keep_snapshots) traj.snapshots.push_back(cloud);
  };

  std::vector<double> last(M);
  auto drift = [&](double ta, double tb) {
    std::fill(last.begin(), last.end(), ta);
    while (next_event <= tb) {
      const double tau = next_event;
      const int m = static_cast<int>(events.below(static_cast<std::uint64_t>(M)));
      RandomStream ps = partners.split(traj.events);
      const MeanFieldCloud& src = source_at(tau);
      int p = draw_partner(src, kernel, cloud.rho[m], ps);
      if (p < 0) {
        ++traj.empty_windows;
        if (!warned) {
          log_warning("empty Gamma window during cloud evolution; sample keeps its velocity");
          warned = true;
        }
        p = ref ? -1 : m;
      }
      if (p >= 0) {
        double* xm = &cloud.x[static_cast<std::size_t>(m) * d];
        double* vm = &cloud.v[static_cast<std::size_t>(m) * d];
        for (int c = 0; c < d; ++c) xm[c] += (tau - last[m]) * vm[c];
        last[m] = tau;
        if (mode == JumpMode::Exchange) {
          if (p != m) {
            double* xp = &cloud.x[static_cast<std::size_t>(p) * d];
            double* vp = &cloud.v[static_cast<std::size_t>(p) * d];
            for (int c = 0; c < d; ++c) xp[c] += (tau - last[p]) * vp[c];
            last[p] = tau;
            for (int c = 0; c < d; ++c) std::swap(vm[c], vp[c]);
          }
        } else {
          const double* vp = &src.v[static_cast<std::size_t>(p) * d];
          for (int c = 0; c < d; ++c) vm[c] = vp[c];
        }
      }
      ++traj.events;
      if (opt.max_events != 0 && traj.events > opt.max_events) {
        throw BudgetExceeded("cloud jump budget of " + std::to_string(opt.max_events) +
                             " exceeded");
      }
      next_event += events.exponential(rate);
    }
    for (int m = 0; m < M; ++m) {
      const double dtm = tb - last[m];
      for (int c = 0; c < d; ++c) {
        cloud.x[static_cast<std::size_t>(m) * d + c] +=
            dtm * cloud.v[static_cast<std::size_t>(m) * d + c];
      }
    }
  };

  std::size_t next_stop = 0;
  while (next_stop < stops.size() && stops[next_stop] <= t0 + 1e-12) {
    emit();
    ++next_stop;
  }
  std::vector<double> acc = accel(t0);
  std::vector<double> bounds;
  for (std::size_t s = next_stop; s < stops.size(); ++s) {
    if (stops[s] < t_end - 1e-12) bounds.push_back(stops[s]);
  }
  bounds.push_back(t_end);
  double t = t0;
  for (double b : bounds) {
    const double seg = b - t;
    if (seg > 0.0) {
      const long n = std::max(1L, static_cast<long>(std::ceil(seg / opt.dt_max * (1.0 - 1e-12))));
      const double h = seg / n;
      for (long s = 0; s < n; ++s) {
        const double ta = t + s * h;
        const double tb = s + 1 == n ? b : t + (s + 1) * h;
        for (std::size_t q = 0; q < len; ++q) cloud.v[q] += 0.5 * (tb - ta) * acc[q];
        drift(ta, tb);
        cloud.t = tb;
        acc = accel(tb);
        for (std::size_t q = 0; q < len; ++q) cloud.v[q] += 0.5 * (tb - ta) * acc[q];
      }
    }
    t = b;
    cloud.t = b;
    while (next_stop < stops.size() && stops[next_stop] <= b + 1e-12) {
      emit();
      ++next_stop;
    }
  }
  traj.final_cloud = std::move(cloud);
  return traj;
}

}  // namespace

CloudTrajectory evolve_cloud(MeanFieldCloud cloud, const CloudKernel& kernel,
                             const PotentialSpec& potentials, double gamma_bar, double horizon,
                             const CloudEvolveOptions& options, RandomStream& rng,
                             const std::vector<CloudObserver>& observers) {
  return evolve_impl(std::move(cloud), kernel, potentials, gamma_bar, horizon, options, rng,
                     observers, nullptr);
}

CloudTrajectory picard_step(const PicardReference& reference, const MeanFieldCloud& initial,
                            const CloudKernel& kernel, const PotentialSpec& potentials,
                            double gamma_bar, double horizon, const CloudEvolveOptions& options,
                            RandomStream& rng) {
  return evolve_impl(initial, kernel, potentials, gamma_bar, horizon, options, rng, {},
                     &reference);
}

PicardReference frozen_reference(const MeanFieldCloud& initial, const std::vector<double>& times) {
  PicardReference ref;
  for (double t : times) {
    ref.snapshots.push_back(initial);
    ref.snapshots.back().t = t;
  }
  ref.validate();
  return ref;
}

PicardReference reference_from(const CloudTrajectory& traj) {
  PicardReference ref;
  ref.snapshots = traj.snapshots;
  ref.validate();
  return ref;
}

PathMeasure path_measure(const std::vector<MeanFieldCloud>& snapshots) {
  if (snapshots.empty()) throw InvalidArgument("no snapshots");
  PathMeasure p;
  p.d = snapshots.front().d;
  p.r = snapshots.front().rho;
  for (const auto& s : snapshots) {
    p.x.push_back(s.x);
    p.v.push_back(s.v);
  }
  return p;
}

PicardReport picard_iterate(const MeanFieldCloud& initial, const CloudKernel& kernel,
                            const PotentialSpec& potentials, double gamma_bar, double horizon,
                            double dt_max, int iterations, int boxes, std::uint64_t seed,
                            ForcePath path) {
  const long n = std::max(1L, static_cast<long>(std::ceil(horizon / dt_max * (1.0 - 1e-12))));
  std::vector<double> grid(n + 1);
  for (long s = 0; s <= n; ++s) grid[s] = initial.t + horizon * s / n;
  grid.back() = initial.t + horizon;
  PicardReference ref = frozen_reference(initial, grid);
  PathMeasure prev = path_measure(ref.snapshots);
  CloudEvolveOptions opt;
  opt.dt_max = dt_max;
  opt.mode = JumpMode::Resample;
  opt.path = path;
  opt.snapshot_times = grid;
  PicardReport rep;
  for (int it = 1; it <= iterations; ++it) {
    RandomStream rng(seed);
    const CloudTrajectory traj =
        picard_step(ref, initial, kernel, potentials, gamma_bar, horizon, opt, rng);
    PathMeasure cur = path_measure(traj.snapshots);
    rep.distances.push_back(sliced_w1_paths(cur, prev, boxes));
    if (rep.distances.size() >= 2) {
      const double a = rep.distances[rep.distances.size() - 2];
      rep.ratios.push_back(a > 0.0 ? rep.distances.back() / a : 0.0);
    }
    ref = reference_from(traj);
    prev = std::move(cur);
  }
  return rep;
}

std::vector<GeneratorTestFunction> generator_basket(double bump_radius) {
  std::vector<GeneratorTestFunction> b;
  auto zero = [](double, const double*, const double*, int d, double* gx, double* gv) {
    for (int c = 0; c < d; ++c) gx[c] = gv[c] = 0.0;
  };
  b.push_back({"one", TestKind::Constant, 0.0,
               [](double, const double*, const double*, int) { return 1.0; }, zero});
  b.push_back({"v1", TestKind::V1, 0.0,
               [](double, const double*, const double* v, int) { return v[0]; },
               [zero](double r, const double* x, const double* v, int d, double* gx, double* gv) {
                 zero(r, x, v, d, gx, gv);
                 gv[0] = 1.0;
               }});
  b.push_back({"x1", TestKind::X1, 0.0,
               [](double, const double* x, const double*, int) { return x[0]; },
               [zero](double r, const double* x, const double* v, int d, double* gx, double* gv) {
                 zero(r, x, v, d, gx, gv);
                 gx[0] = 1.0;
               }});
  b.push_back({"kinetic", TestKind::Kinetic, 0.0,
               [](double, const double*, const double* v, int d) {
                 double s = 0;
                 for (int c = 0; c < d; ++c) s += v[c] * v[c];
                 return 0.5 * s;
               },
               [](double, const double*, const double* v, int d, double* gx, double* gv) {
                 for (int c = 0; c < d; ++c) {
                   gx[c] = 0.0;
                   gv[c] = v[c];
                 }
               }});
  b.push_back({"x_dot_v", TestKind::XdotV, 0.0,
               [](double, const double* x, const double* v, int d) {
                 double s = 0;
                 for (int c = 0; c < d; ++c) s += x[c] * v[c];
                 return s;
               },
               [](double, const double* x, const double* v, int d, double* gx, double* gv) {
                 for (int c = 0; c < d; ++c) {
                   gx[c] = v[c];
                   gv[c] = x[c];
                 }
               }});
  const double R2 = bump_radius * bump_radius;
  auto bump_q = [R2](const double* x, const double* v, int d) {
    double s = 0;
    for (int c = 0; c < d; ++c) s += x[c] * x[c] + v[c] * v[c];
    return s / R2;
  };
  b.push_back({"bump", TestKind::Bump, bump_radius,
               [bump_q](double, const double* x, const double* v, int d) {
                 const double q = bump_q(x, v, d);
                 return q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
               },
               [bump_q, R2](double, const double* x, const double* v, int d, double* gx,
                            double* gv) {
                 const double q = bump_q(x, v, d);
                 double f = 0.0;
                 if (q < 1.0) {
                   const double o = 1.0 - q;
                   f = -std::exp(-1.0 / o) / (o * o) * 2.0 / R2;
                 }
                 for (int c = 0; c < d; ++c) {
                   gx[c] = f * x[c];
                   gv[c] = f * v[c];
                 }
               }});
  return b;
}

namespace {

struct LocalSums {
  std::vector<double> force;  // full acceleration at the point
  double gamma_sum = 0.0;
  std::vector<double> gamma_v;  // sum Gamma v'
  double gamma_kin = 0.0;       // sum Gamma |v'|^2/2
};

LocalSums local_sums(const MeanFieldCloud& nu, double r, const double* x,
                     const CloudKernel& kernel, const PotentialSpec& pot) {
  const int d = nu.d;
  LocalSums s;
  s.force.assign(d, 0.0);
  s.gamma_v.assign(d, 0.0);
  std::vector<double> diff(d), g(d);
  const bool same = kernel.phi_profile().kind() == kernel.gamma_profile().kind() &&
                    kernel.phi_profile().sharpness() == kernel.gamma_profile().sharpness();
  for (const auto& [b, e] : rho_window(nu.rho, r, 0.5 * kernel.ell())) {
    for (int q = b; q < e; ++q) {
      const double dr = r - nu.rho[q];
      const double wp = kernel.Phi(dr);
      const double wg = same ? wp : kernel.Gamma(dr);
      const double* y = &nu.x[static_cast<std::size_t>(q) * d];
      const double* vq = &nu.v[static_cast<std::size_t>(q) * d];
      if (wp != 0.0) {
        for (int c = 0; c < d; ++c) diff[c] = x[c] - y[c];
        pot.grad_W(diff.data(), d, g.data());
        for (int c = 0; c < d; ++c) s.force[c] -= wp * g[c];
      }
      if (wg != 0.0) {
        s.gamma_sum += wg;
        double k2 = 0;
        for (int c = 0; c < d; ++c) {
          s.gamma_v[c] += wg * vq[c];
          k2 += vq[c] * vq[c];
        }
        s.gamma_kin += 0.5 * wg * k2;
      }
    }
  }
  for (int c = 0; c < d; ++c) s.force[c] /= nu.M;
  pot.grad_U(x, d, g.data());
  for (int c = 0; c < d; ++c) s.force[c] -= g[c];
  return s;
}

double jump_part(const MeanFieldCloud& nu, const GeneratorTestFunction& psi, double r,
                 const double* x, const double* v, const CloudKernel& kernel,
                 const LocalSums& s) {
  const int d = nu.d;
  if (s.gamma_sum <= 0.0) return 0.0;
  const double here = psi.value(r, x, v, d);
  switch (psi.kind) {
    case TestKind::Constant:
    case TestKind::X1:
      return 0.0;
    case TestKind::V1:
      return s.gamma_v[0] / s.gamma_sum - here;
    case TestKind::Kinetic:
      return s.gamma_kin / s.gamma_sum - here;
    case TestKind::XdotV: {
      double a = 0;
      for (int c = 0; c < d; ++c) a += x[c] * s.gamma_v[c];
      return a / s.gamma_sum - here;
    }
    default:
      break;
  }
  double acc = 0.0;
  for (const auto& [b, e] : rho_window(nu.rho, r, 0.5 * kernel.ell())) {
    for (int q = b; q < e; ++q) {
      const double wg = kernel.Gamma(r - nu.rho[q]);
      if (wg == 0.0) continue;
      acc += wg * psi.value(r, x, &nu.v[static_cast<std::size_t>(q) * d], d);
    }
  }
  return acc / s.gamma_sum - here;
}

double drift_part(const GeneratorTestFunction& psi, double r, const double* x, const double* v,
                  int d, const LocalSums& s) {
  std::vector<double> gx(d), gv(d);
  psi.grad(r, x, v, d, gx.data(), gv.data());
  double a = 0.0;
  for (int c = 0; c < d; ++c) a += v[c] * gx[c] + s.force[c] * gv[c];
  return a;
}

}  // namespace

double generator_apply(const MeanFieldCloud& nu, const GeneratorTestFunction& psi, double r,
                       const double* x, const double* v, const CloudKernel& kernel,
                       const PotentialSpec& potentials, double gamma_bar) {
  if (psi.kind == TestKind::Constant) return 0.0;
  const LocalSums s = local_sums(nu, r, x, kernel, potentials);
  return drift_part(psi, r, x, v, nu.d, s) +
         gamma_bar * jump_part(nu, psi, r, x, v, kernel, s);
}

std::vector<std::vector<double>> generator_all(const MeanFieldCloud& nu,
                                               const std::vector<GeneratorTestFunction>& psis,
                                               const CloudKernel& kernel,
                                               const PotentialSpec& potentials, double gamma_bar) {
  const int d = nu.d;
  std::vector<std::vector<double>> out(psis.size(), std::vector<double>(nu.M, 0.0));
  for (int m = 0; m < nu.M; ++m) {
    const double* x = &nu.x[static_cast<std::size_t>(m) * d];
    const double* v = &nu.v[static_cast<std::size_t>(m) * d];
    const LocalSums s = local_sums(nu, nu.rho[m], x, kernel, potentials);
    for (std::size_t p = 0; p < psis.size(); ++p) {
      if (psis[p].kind == TestKind::Constant) continue;
      out[p][m] = drift_part(psis[p], nu.rho[m], x, v, d, s) +
                  gamma_bar * jump_part(nu, psis[p], nu.rho[m], x, v, kernel, s);
    }
  }
  return out;
}

std::vector<ResidualStat> generator_residual(const MeanFieldCloud& at_t,
                                             const MeanFieldCloud& at_t_delta,
                                             const std::vector<GeneratorTestFunction>& psis,
                                             const CloudKernel& kernel,
                                             const PotentialSpec& potentials, double gamma_bar) {
  if (at_t.M != at_t_delta.M || at_t.rho != at_t_delta.rho) {
    throw InvalidArgument("residual snapshots must come from the same cloud");
  }
  const double delta = at_t_delta.t - at_t.t;
  if (!(delta > 0.0)) throw InvalidArgument("residual needs delta > 0");
  const auto L = generator_all(at_t, psis, kernel, potentials, gamma_bar);
  const int d = at_t.d;
  std::vector<ResidualStat> out;
  for (std::size_t p = 0; p < psis.size(); ++p) {
    ResidualStat st;
    st.name = psis[p].name;
    if (psis[p].kind == TestKind::Constant) {
      out.push_back(st);
      continue;
    }
    double s = 0.0, ss = 0.0;
    for (int m = 0; m < at_t.M; ++m) {
      const std::size_t o = static_cast<std::size_t>(m) * d;
      const double a = psis[p].value(at_t.rho[m], &at_t.x[o], &at_t.v[o], d);
      const double b = psis[p].value(at_t.rho[m], &at_t_delta.x[o], &at_t_delta.v[o], d);
      const double res = b - a - delta * L[p][m];
      s += res;
      ss += res * res;
    }
    const double n = at_t.M;
    st.mean = s / n;
    st.se = std::sqrt(std::max(ss / n - st.mean * st.mean, 0.0) / n);
    out.push_back(st);
  }
  return out;
}

}  // namespace kac
