#include "kacchain/potential.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "kacchain/error.hpp"
#include "kacchain/rng.hpp"

namespace kac {

PotentialSpec PotentialSpec::harmonic(double a) {
  if (!(a > 0.0)) throw InvalidArgument("harmonic pinning requires a > 0");
  PotentialSpec s;
  s.pin_ = PinningKind::Harmonic;
  s.a_ = a;
  return s;
}

PotentialSpec PotentialSpec::homogeneous(double a, double b) {
  PotentialSpec s;
  s.pin_ = PinningKind::Homogeneous;
  s.a_ = a;
  s.b_ = b;
  // min over the sphere of psi must be positive: a/2 + b*(1/d or 1).
  if (!(a / 2.0 + std::min(b, 0.0) > 0.0) || !(a > 0.0)) {
    throw InvalidArgument("homogeneous pinning requires a strictly positive direction profile");
  }
  return s;
}

PotentialSpec& PotentialSpec::with_soft_pair() {
  pair_ = PairKind::Soft;
  return *this;
}

PotentialSpec& PotentialSpec::with_custom_pair(ValueFn value, GradFn grad) {
  pair_ = PairKind::Custom;
  w_value_ = std::move(value);
  w_grad_ = std::move(grad);
  return *this;
}

std::string PotentialSpec::describe() const {
  std::ostringstream os;
  os << "W=" << (pair_ == PairKind::Harmonic ? "harmonic" : pair_ == PairKind::Soft ? "soft" : "custom")
     << " U=" << (pin_ == PinningKind::Harmonic ? "harmonic" : "homogeneous") << " a=" << a_
     << " b=" << b_;
  return os.str();
}

double PotentialSpec::W(const double* x, int d) const {
  double s = 0.0;
  for (int c = 0; c < d; ++c) s += x[c] * x[c];
  switch (pair_) {
    case PairKind::Harmonic:
      return 0.5 * s;
    case PairKind::Soft:
      return s / (std::sqrt(1.0 + s) + 1.0);
    case PairKind::Custom:
      return w_value_(std::span<const double>(x, d));
  }
  return 0.0;
}

void PotentialSpec::grad_W(const double* x, int d, double* out) const {
  switch (pair_) {
    case PairKind::Harmonic:
      for (int c = 0; c < d; ++c) out[c] = x[c];
      return;
    case PairKind::Soft: {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += x[c] * x[c];
      const double f = 1.0 / std::sqrt(1.0 + s);
      for (int c = 0; c < d; ++c) out[c] = x[c] * f;
      return;
    }
    case PairKind::Custom:
      w_grad_(std::span<const double>(x, d), std::span<double>(out, d));
      return;
  }
}

double PotentialSpec::U(const double* x, int d) const {
  double s = 0.0, q = 0.0;
  for (int c = 0; c < d; ++c) {
    const double x2 = x[c] * x[c];
    s += x2;
    q += x2 * x2;
  }
  if (harmonic_pinning() || s == 0.0) return 0.5 * a_ * s;
  return 0.5 * a_ * s + b_ * q / s;
}

void PotentialSpec::grad_U(const double* x, int d, double* out) const {
  double s = 0.0, q = 0.0;
  for (int c = 0; c < d; ++c) {
    const double x2 = x[c] * x[c];
    s += x2;
    q += x2 * x2;
  }
  if (harmonic_pinning() || s == 0.0) {
    for (int c = 0; c < d; ++c) out[c] = a_ * x[c];
    return;
  }
  for (int c = 0; c < d; ++c) {
    out[c] = a_ * x[c] + b_ * (4.0 * x[c] * x[c] * x[c] / s - 2.0 * x[c] * q / (s * s));
  }
}

double PotentialSpec::psi(const double* theta, int d) const {
  double q = 0.0;
  for (int c = 0; c < d; ++c) q += theta[c] * theta[c] * theta[c] * theta[c];
  return 0.5 * a_ + (harmonic_pinning() ? 0.0 : b_ * q);
}

double PotentialSpec::psi_min(int d) const {
  if (harmonic_pinning()) return 0.5 * a_;
  return 0.5 * a_ + (b_ >= 0.0 ? b_ / d : b_);
}

void validate_potentials(const PotentialSpec& spec, int d, double c, RandomStream& rng) {
  if (d < 1) throw InvalidArgument("dimension d must be positive");
  if (spec.pinning_kind() == PinningKind::Homogeneous && spec.b() != 0.0 && d == 1) {
    throw InvalidArgument(
        "anharmonic pinning needs d >= 2: in d = 1 an even direction profile takes one value "
        "on {-1, +1}, which forces U to be harmonic");
  }
  std::vector<double> zero(d, 0.0), g(d), x(d), th(d), mth(d);
  spec.grad_W(zero.data(), d, g.data());
  for (double v : g)
    if (v != 0.0) throw InvalidArgument("grad W(0) must vanish");
  spec.grad_U(zero.data(), d, g.data());
  for (double v : g)
    if (v != 0.0) throw InvalidArgument("grad U(0) must vanish");
  for (int trial = 0; trial < 256; ++trial) {
    const double radius = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    double norm = 0.0;
    for (int k = 0; k < d; ++k) {
      th[k] = rng.normal();
      norm += th[k] * th[k];
    }
    norm = std::sqrt(norm);
    for (int k = 0; k < d; ++k) {
      th[k] /= norm;
      mth[k] = -th[k];
      x[k] = radius * th[k];
    }
    if (spec.psi(th.data(), d) != spec.psi(mth.data(), d)) {
      throw InvalidArgument("direction profile psi must be even");
    }
    const double u = spec.U(x.data(), d);
    spec.grad_U(x.data(), d, g.data());
    double xg = 0.0, x2 = 0.0;
    for (int k = 0; k < d; ++k) {
      xg += x[k] * g[k];
      x2 += x[k] * x[k];
    }
    if (std::abs(xg - 2.0 * u) > 1e-10 * std::abs(2.0 * u)) {
      throw InvalidArgument("pinning potential is not homogeneous of degree 2 (x.grad U != 2U)");
    }
    if (x2 > c * u * (1.0 + 1e-12)) {
      throw InvalidArgument("growth hypothesis |x|^2 <= c U(x) fails for the configured c");
    }
    const double w = spec.W(x.data(), d);
    spec.grad_W(x.data(), d, g.data());
    double g2 = 0.0;
    for (int k = 0; k < d; ++k) g2 += g[k] * g[k];
    if (g2 > c * w * (1.0 + 1e-9) + 1e-300) {
      throw InvalidArgument("growth hypothesis |grad W|^2 <= c W(x) fails for the configured c");
    }
  }
}

}  // namespace kac
