#include "kacchain/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kacchain/error.hpp"

namespace kac {

double default_dt_max(double ell) { return std::min(1e-2, ell / 10.0); }

double ModelParams::step_cap() const { return dt_max > 0.0 ? dt_max : default_dt_max(ell); }

void ModelParams::validate() const {
  if (N < 1) throw InvalidArgument("N must be a positive integer");
  if (!(ell > 0.0 && ell < 1.0)) throw InvalidArgument("ell must lie in (0, 1)");
  if (ell * N < 1.0 - 1e-12) {
    throw InvalidArgument("ell*N must be at least 1 (got " + std::to_string(ell * N) + ")");
  }
  if (!(gamma_bar >= 0.0) || !std::isfinite(gamma_bar)) {
    throw InvalidArgument("gamma_bar must be a finite nonnegative real");
  }
  if (d < 1) throw InvalidArgument("d must be a positive integer");
  if (dt_max < 0.0 || !std::isfinite(dt_max)) throw InvalidArgument("dt_max must be positive");
  if (!(moment_order_b > 0.0)) throw InvalidArgument("moment_order_b must be positive");
}

BoxPartition::BoxPartition(int N, int J, bool) : N_(N), J_(J) {}

BoxPartition::BoxPartition(int N, double eps) : N_(N), J_(0) {
  if (N < 1) throw InvalidArgument("N must be positive");
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("eps_N must lie in (0, 1]");
  const double inv = 1.0 / eps;
  const long J = std::lround(inv);
  if (J < 1 || std::abs(inv - static_cast<double>(J)) > 1e-9 * inv) {
    throw InvalidArgument("eps_N^-1 must be an integer (got " + std::to_string(inv) + ")");
  }
  if (N % J != 0) {
    throw InvalidArgument("eps_N^-1 = " + std::to_string(J) + " must divide N = " +
                          std::to_string(N));
  }
  J_ = static_cast<int>(J);
}

BoxPartition BoxPartition::with_boxes(int N, int J) {
  if (J < 1 || N < 1 || N % J != 0) {
    throw InvalidArgument("box count " + std::to_string(J) + " must divide N = " +
                          std::to_string(N));
  }
  return BoxPartition(N, J, true);
}

int BoxPartition::box_of_r(double r) const {
  const double y = torus_reduce(r);
  int j = static_cast<int>(std::ceil(y * J_ - 1e-9)) - 1;
  if (j < 0) j = J_ - 1;
  if (j >= J_) j = J_ - 1;
  return j;
}

std::pair<int, int> BoxPartition::site_range(int j) const {
  const int n = N_ / J_;
  return {j * n, (j + 1) * n};
}

double convergence_eps(double ell, int N, int d) {
  const double q = 2.0 * d + 3.0;
  return std::pow(ell, (2.0 * d + 2.0) / q) * std::pow(static_cast<double>(N), -1.0 / q);
}

int snap_box_count(double eps_target, int N, double ell) {
  int best = -1;
  double best_gap = 0.0;
  for (int J = 2; J < N; ++J) {
    if (N % J != 0 || !(1.0 / J < ell)) continue;
    const double gap = std::abs(std::log(J * eps_target));
    if (best < 0 || gap < best_gap) {
      best = J;
      best_gap = gap;
    }
  }
  if (best < 0) {
    throw InvalidArgument("no divisor J of N = " + std::to_string(N) +
                          " satisfies 1/N < 1/J < ell");
  }
  return best;
}

int validate_eps(double eps, int N, double ell) {
  const BoxPartition p(N, eps);
  const double e = p.eps();
  if (!(e > 1.0 / N) || !(e < ell)) {
    throw InvalidArgument("eps_N must satisfy 1/N < eps_N < ell");
  }
  return p.boxes();
}

double TemperatureProfile::operator()(double r) const {
  return T0 + amp * std::cos(2.0 * std::numbers::pi * mode * r);
}

void TemperatureProfile::validate() const {
  if (!(T0 - std::abs(amp) > 0.0)) {
    throw InvalidArgument("temperature profile must be strictly positive (need T0 > |amp|)");
  }
  if (mode < 0) throw InvalidArgument("temperature mode must be nonnegative");
}

LocalGibbsSampler::LocalGibbsSampler(const InitialCondition& ic) : ic_(ic) { ic_.T.validate(); }

double LocalGibbsSampler::acceptance_rate() const {
  return attempts_ == 0 ? 1.0 : static_cast<double>(accepted_) / attempts_;
}

void LocalGibbsSampler::draw(double r, RandomStream& rng, double* x, double* v) {
  const int d = ic_.d;
  const double T = ic_.T(r);
  const double sv = std::sqrt(T);
  for (int c = 0; c < d; ++c) v[c] = sv * rng.normal();
  const PotentialSpec& pot = ic_.potentials;
  if (pot.harmonic_pinning()) {
    const double sx = std::sqrt(T / (pot.a() + 1.0));
    for (int c = 0; c < d; ++c) x[c] = sx * rng.normal();
    return;
  }
  // Density exp(-|x|^2 (psi(theta) + 1/2) / T); proposal uses psi_min.
  const double pmin = pot.psi_min(d);
  const double sx = std::sqrt(T / (1.0 + 2.0 * pmin));
  for (;;) {
    ++attempts_;
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      x[c] = sx * rng.normal();
      s += x[c] * x[c];
    }
    if (s == 0.0) {
      ++accepted_;
      return;
    }
    const double excess = pot.U(x, d) - pmin * s;
    if (rng.uniform() < std::exp(-excess / T)) {
      ++accepted_;
      return;
    }
    if (attempts_ >= 1000 && acceptance_rate() < 0.01) {
      throw NumericalError("local Gibbs rejection sampler acceptance rate " +
                           std::to_string(acceptance_rate()) + " fell below 1%");
    }
  }
}

PhaseSamples sample_initial(const InitialCondition& ic, std::size_t count, RAssignment assign,
                            RandomStream& rng, const BoxPartition* partition) {
  if (count < 1) throw InvalidArgument("sample count must be at least 1");
  const int d = ic.d;
  PhaseSamples out;
  out.d = d;
  out.r.resize(count);
  out.x.resize(count * d);
  out.v.resize(count * d);
  if (assign == RAssignment::UniformInBox) {
    if (partition == nullptr) throw InvalidArgument("uniform-in-box assignment needs a partition");
    if (count % partition->boxes() != 0) {
      throw InvalidArgument("sample count must be a multiple of the box count");
    }
  }
  const std::size_t per_box =
      assign == RAssignment::UniformInBox ? count / partition->boxes() : 0;
  LocalGibbsSampler sampler(ic);
  for (std::size_t s = 0; s < count; ++s) {
    double r;
    switch (assign) {
      case RAssignment::Grid:
        r = static_cast<double>(s + 1) / count;
        break;
      case RAssignment::UniformInBox: {
        const double j = static_cast<double>(s / per_box);
        r = (j + rng.uniform()) * partition->eps();
        break;
      }
      default:
        r = rng.uniform();
    }
    out.r[s] = r;
    sampler.draw(r, rng, &out.x[s * d], &out.v[s * d]);
  }
  return out;
}

double local_gibbs_energy(const InitialCondition& ic, double r) { return ic.d * ic.T(r); }

SamplerSelfTest sampler_self_test(const InitialCondition& ic, std::size_t count, double b,
                                  RandomStream& rng) {
  const PhaseSamples s = sample_initial(ic, count, RAssignment::Uniform, rng);
  const int d = ic.d;
  const double n = static_cast<double>(count);
  SamplerSelfTest t;
  auto zscore = [n](double sum, double sumsq) {
    const double mean = sum / n;
    const double var = std::max(sumsq / n - mean * mean, 1e-300);
    return std::abs(mean) / std::sqrt(var / n);
  };
  for (int c = 0; c < d; ++c) {
    double sx = 0, sxx = 0, sv = 0, svv = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const double x = s.x[i * d + c], v = s.v[i * d + c];
      sx += x;
      sxx += x * x;
      sv += v;
      svv += v * v;
    }
    t.mean_x_z = std::max(t.mean_x_z, zscore(sx, sxx));
    t.mean_v_z = std::max(t.mean_v_z, zscore(sv, svv));
  }
  double se = 0, see = 0, mom = 0;
  std::vector<double> rs(s.r);
  for (std::size_t i = 0; i < count; ++i) {
    const double* x = &s.x[i * d];
    const double* v = &s.v[i * d];
    double v2 = 0, x2 = 0;
    for (int c = 0; c < d; ++c) {
      v2 += v[c] * v[c];
      x2 += x[c] * x[c];
    }
    const double e = 0.5 * v2 + ic.potentials.U(x, d) + 0.5 * x2 - local_gibbs_energy(ic, s.r[i]);
    se += e;
    see += e * e;
    mom += std::pow(v2 + x2, 1.0 + b);
  }
  t.energy_z = zscore(se, see);
  t.moment_2_2b = mom / n;
  std::sort(rs.begin(), rs.end());
  for (std::size_t i = 0; i < count; ++i) {
    t.r_ks = std::max({t.r_ks, (i + 1) / n - rs[i], rs[i] - i / n});
  }
  // 4-sigma style thresholds; the KS bound 1.95/sqrt(n) is the p = 0.001 level.
  t.passed = t.mean_x_z < 4.0 && t.mean_v_z < 4.0 && t.energy_z < 4.0 &&
             t.r_ks < 1.95 / std::sqrt(n) && std::isfinite(t.moment_2_2b);
  return t;
}

}  // namespace kac
