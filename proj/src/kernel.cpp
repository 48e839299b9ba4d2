#include "kacchain/kernel.hpp"

#include <cmath>
#include <string>

#include "kacchain/error.hpp"
#include "kacchain/quadrature.hpp"

namespace kac {

double torus_reduce(double r) {
  double y = r - std::floor(r);
  if (y >= 1.0) y = 0.0;
  return y;
}

double torus_signed(double r) {
  double y = torus_reduce(r);
  if (y >= 0.5) y -= 1.0;
  return y;
}

double torus_dist(double a, double b) {
  const double d = std::abs(torus_reduce(a) - torus_reduce(b));
  return std::min(d, 1.0 - d);
}

KernelProfile::KernelProfile(ProfileKind kind, double sharpness)
    : kind_(kind), sharpness_(sharpness) {
  if (kind_ == ProfileKind::UniformTest) {
    norm_ = 1.0;
    return;
  }
  if (!(sharpness_ > 0.0) || !std::isfinite(sharpness_)) {
    throw InvalidArgument("smooth bump sharpness must be positive, got " +
                          std::to_string(sharpness_));
  }
  const QuadratureResult q = romberg([this](double u) { return raw(u); }, -0.5, 0.5, 1e-15);
  if (!q.converged || q.step_change > 1e-12) {
    throw NumericalError("bump normalization quadrature did not converge");
  }
  norm_ = 1.0 / q.value;
  // Unit mass, evenness and monotonicity are checked once on construction.
  const QuadratureResult check =
      romberg([this](double u) { return value(u); }, -0.5, 0.5, 1e-15);
  if (std::abs(check.value - 1.0) > 1e-9) {
    throw InvalidArgument("kernel profile violates unit normalization beyond 1e-9");
  }
  double prev = value(0.0);
  for (int i = 1; i <= 512; ++i) {
    const double u = 0.5 * i / 512.0;
    const double val = value(u);
    if (val < 0.0 || val > prev + 1e-15 || val != value(-u)) {
      throw InvalidArgument("kernel profile must be even, nonnegative and non-increasing");
    }
    prev = val;
  }
}

KernelProfile KernelProfile::smooth_bump(double sharpness) {
  return KernelProfile(ProfileKind::SmoothBump, sharpness);
}

KernelProfile KernelProfile::uniform_test() { return KernelProfile(ProfileKind::UniformTest, 0.0); }

std::string KernelProfile::name() const {
  return kind_ == ProfileKind::SmoothBump ? "bump" : "uniform";
}

double KernelProfile::raw(double u) const {
  const double a = std::abs(u);
  if (kind_ == ProfileKind::UniformTest) return a <= 0.5 ? 1.0 : 0.0;
  if (a >= 0.5) return 0.0;
  const double q = 1.0 - 4.0 * u * u;
  return std::exp(-sharpness_ / q);
}

double KernelProfile::value(double u) const { return norm_ * raw(u); }

double KernelProfile::derivative(double u) const {
  if (kind_ == ProfileKind::UniformTest || std::abs(u) >= 0.5) return 0.0;
  const double q = 1.0 - 4.0 * u * u;
  return value(u) * (-8.0 * sharpness_ * u / (q * q));
}

double KernelProfile::second_derivative(double u) const {
  if (kind_ == ProfileKind::UniformTest || std::abs(u) >= 0.5) return 0.0;
  const double s = sharpness_;
  const double q = 1.0 - 4.0 * u * u;
  const double q2 = q * q;
  const double g = -8.0 * s * u / q2;
  const double gp = -8.0 * s / q2 - 128.0 * s * u * u / (q2 * q);
  return value(u) * (g * g + gp);
}

double KernelProfile::integral(double a, double b) const {
  const double lo = std::max(a, -0.5);
  const double hi = std::min(b, 0.5);
  if (hi <= lo) return 0.0;
  if (kind_ == ProfileKind::UniformTest) return hi - lo;
  const QuadratureResult q = romberg([this](double u) { return value(u); }, lo, hi, 1e-15);
  if (!q.converged && q.step_change > 1e-13) {
    throw NumericalError("cell integral quadrature did not converge");
  }
  return q.value;
}

KacKernel::KacKernel(const KernelProfile& phi, const KernelProfile& gamma, double ell, int N,
                     GammaRule rule)
    : phi_(phi), gamma_(gamma), ell_(ell), N_(N), rule_(rule) {
  if (N < 1) throw InvalidArgument("N must be positive");
  if (!(ell > 0.0 && ell < 1.0)) throw InvalidArgument("ell must lie in (0, 1)");
  const double ellN = ell * N;
  if (ellN < 1.0 - 1e-12) {
    throw InvalidArgument("ell*N must be at least 1 (got " + std::to_string(ellN) + ")");
  }
  L_ = static_cast<int>(std::floor(ellN * (1.0 + 1e-12)));
  phi_k_.assign(2 * L_ + 1, 0.0);
  gamma_k_.assign(2 * L_ + 1, 0.0);
  for (int k = 0; k <= L_; ++k) {
    const double u = k / ellN;
    const double pk = phi_.value(u) / ellN;
    double gk;
    if (rule_ == GammaRule::Pointwise) {
      gk = gamma_.value(u) / ellN;
    } else {
      gk = gamma_.integral((k - 0.5) / ellN, (k + 0.5) / ellN);
    }
    phi_k_[L_ + k] = phi_k_[L_ - k] = pk;
    gamma_k_[L_ + k] = gamma_k_[L_ - k] = gk;
    if (pk > 0.0 || gk > 0.0) support_ = k;
  }
  phi_sum_ = 0.0;
  for (double v : phi_k_) phi_sum_ += v;
  gamma_pos_sum_ = 0.0;
  for (int k = 1; k <= L_; ++k) gamma_pos_sum_ += gamma_k_[L_ + k];
  if (rule_ == GammaRule::CellIntegral) {
    const double total = gamma_k_[L_] + 2.0 * gamma_pos_sum_;
    if (std::abs(total - 1.0) > 1e-12) {
      throw NumericalError("gamma_k cell integrals do not sum to one");
    }
  }
}

double KacKernel::phi_k(int k) const {
  const int a = std::abs(k);
  return a > L_ ? 0.0 : phi_k_[L_ + a];
}

double KacKernel::gamma_k(int k) const {
  const int a = std::abs(k);
  return a > L_ ? 0.0 : gamma_k_[L_ + a];
}

double KacKernel::Phi(double r) const { return phi_.value(torus_signed(r) / ell_) / ell_; }

double KacKernel::Gamma(double r) const { return gamma_.value(torus_signed(r) / ell_) / ell_; }

double KacKernel::Phi_prime(double r) const {
  return phi_.derivative(torus_signed(r) / ell_) / (ell_ * ell_);
}

double KacKernel::Phi_second(double r) const {
  return phi_.second_derivative(torus_signed(r) / ell_) / (ell_ * ell_ * ell_);
}

KacKernel build_kernel(const KernelProfile& phi, const KernelProfile& gamma, double ell, int N,
                       GammaRule rule) {
  return KacKernel(phi, gamma, ell, N, rule);
}

double profile_moment(const KernelProfile& p) {
  const QuadratureResult q =
      romberg([&p](double u) { return u * u * p.value(u); }, -0.5, 0.5, 1e-15);
  if (!q.converged && q.step_change > 1e-10) {
    throw NumericalError("kernel moment quadrature did not converge to 1e-10");
  }
  return 0.5 * q.value;
}

KernelMoments kernel_moments(const KacKernel& kernel) {
  return {profile_moment(kernel.profile_phi()), profile_moment(kernel.profile_gamma())};
}

}  // namespace kac
