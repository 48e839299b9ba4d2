#pragma once

#include <functional>
#include <span>
#include <string>

namespace kac {

class RandomStream;

enum class PairKind { Harmonic, Soft, Custom };
enum class PinningKind { Harmonic, Homogeneous };

// Interaction W and pinning U.
//   W harmonic: |x|^2/2.  W soft: sqrt(1+|x|^2) - 1.  W custom: callables.
//   U harmonic: a|x|^2/2.  U homogeneous: |x|^2 psi(x/|x|) with
//   psi(theta) = a/2 + b * sum_j theta_j^4 (harmonic when b = 0 or d = 1).
class PotentialSpec {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

  static PotentialSpec harmonic(double a = 1.0);
  static PotentialSpec homogeneous(double a, double b);

  PotentialSpec& with_soft_pair();
  PotentialSpec& with_custom_pair(ValueFn value, GradFn grad);

  PairKind pair_kind() const { return pair_; }
  PinningKind pinning_kind() const { return pin_; }
  bool harmonic_pair() const { return pair_ == PairKind::Harmonic; }
  bool harmonic_pinning() const { return pin_ == PinningKind::Harmonic || b_ == 0.0; }
  bool homogeneous_pinning() const { return true; }
  double a() const { return a_; }
  double b() const { return b_; }
  std::string describe() const;

  double W(const double* x, int d) const;
  void grad_W(const double* x, int d, double* out) const;
  double U(const double* x, int d) const;
  void grad_U(const double* x, int d, double* out) const;
  double psi(const double* theta, int d) const;
  double psi_min(int d) const;

 private:
  PairKind pair_ = PairKind::Harmonic;
  PinningKind pin_ = PinningKind::Harmonic;
  double a_ = 1.0;
  double b_ = 0.0;
  ValueFn w_value_;
  GradFn w_grad_;
};

// Spot checks of grad W(0) = grad U(0) = 0, x.grad U = 2U, psi evenness and the
// growth bounds |x|^2 <= c U, |grad W|^2 <= c W. Throws InvalidArgument.
void validate_potentials(const PotentialSpec& spec, int d, double c, RandomStream& rng);

}  // namespace kac
