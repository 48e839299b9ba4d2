#pragma once

#include <string>
#include <vector>

namespace kac {

enum class ProfileKind { SmoothBump, UniformTest };

// Even, nonnegative profile supported in [-1/2, 1/2] with unit mass.
// Smooth bump: C * exp(-s / (1 - 4u^2)) for |u| < 1/2.
// Uniform test profile: 1 on [-1/2, 1/2] (closed-form tests only).
class KernelProfile {
 public:
  static KernelProfile smooth_bump(double sharpness = 1.0);
  static KernelProfile uniform_test();

  ProfileKind kind() const { return kind_; }
  double sharpness() const { return sharpness_; }
  bool test_only() const { return kind_ == ProfileKind::UniformTest; }
  double normalization() const { return norm_; }
  std::string name() const;

  double value(double u) const;
  double derivative(double u) const;
  double second_derivative(double u) const;
  double peak() const { return value(0.0); }

  // Integral of the profile over [a, b] (clipped to the support).
  double integral(double a, double b) const;

 private:
  KernelProfile(ProfileKind kind, double sharpness);
  double raw(double u) const;

  ProfileKind kind_;
  double sharpness_;
  double norm_ = 1.0;
};

enum class GammaRule { CellIntegral, Pointwise };

// Lattice coefficients phi_k, gamma_k for |k| <= floor(ell*N) together with the
// rescaled torus evaluators Phi_ell(r) = phi(r/ell)/ell, Gamma_ell(r) = gamma(r/ell)/ell.
class KacKernel {
 public:
  KacKernel(const KernelProfile& phi, const KernelProfile& gamma, double ell, int N,
            GammaRule rule = GammaRule::CellIntegral);

  const KernelProfile& profile_phi() const { return phi_; }
  const KernelProfile& profile_gamma() const { return gamma_; }
  double ell() const { return ell_; }
  int N() const { return N_; }
  GammaRule gamma_rule() const { return rule_; }

  // floor(ell*N)
  int max_lag() const { return L_; }
  // Largest lag carrying nonzero weight in either array.
  int support_lag() const { return support_; }

  double phi_k(int k) const;
  double gamma_k(int k) const;
  // Arrays indexed by k + max_lag().
  const std::vector<double>& phi_array() const { return phi_k_; }
  const std::vector<double>& gamma_array() const { return gamma_k_; }

  double phi_sum() const { return phi_sum_; }
  // Sum over k = 1..max_lag of gamma_k.
  double gamma_positive_sum() const { return gamma_pos_sum_; }

  double Phi(double r) const;
  double Gamma(double r) const;
  double Phi_prime(double r) const;
  double Phi_second(double r) const;
  double Gamma_max() const { return gamma_.peak() / ell_; }

 private:
  KernelProfile phi_, gamma_;
  double ell_;
  int N_;
  GammaRule rule_;
  int L_;
  int support_ = 0;
  std::vector<double> phi_k_, gamma_k_;
  double phi_sum_ = 0.0, gamma_pos_sum_ = 0.0;
};

KacKernel build_kernel(const KernelProfile& phi, const KernelProfile& gamma, double ell, int N,
                       GammaRule rule = GammaRule::CellIntegral);

struct KernelMoments {
  double c_phi;
  double c_gamma;
};

// c = 1/2 * int u^2 profile(u) du.
double profile_moment(const KernelProfile& p);
KernelMoments kernel_moments(const KacKernel& kernel);

// Torus helpers on [0, 1).
double torus_reduce(double r);
double torus_signed(double r);  // representative in [-1/2, 1/2)
double torus_dist(double a, double b);

}  // namespace kac
