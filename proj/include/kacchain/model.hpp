#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "kacchain/kernel.hpp"
#include "kacchain/potential.hpp"
#include "kacchain/rng.hpp"

namespace kac {

struct ModelParams {
  int N = 1024;
  double ell = 0.25;
  double gamma_bar = 1.0;
  int d = 1;
  double dt_max = 0.0;  // 0 selects default_dt_max(ell)
  double moment_order_b = 1.0;
  std::uint64_t seed = 1;

  double step_cap() const;
  void validate() const;
};

double default_dt_max(double ell);

// Boxes B_j = (j*eps, (j+1)*eps], j = 0..J-1 with J = 1/eps; site i (1-based,
// r = i/N) belongs to box ceil(i/(N*eps)) - 1. Internally sites are 0-based:
// site s has r = (s+1)/N.
class BoxPartition {
 public:
  BoxPartition(int N, double eps);
  static BoxPartition with_boxes(int N, int J);

  int N() const { return N_; }
  int boxes() const { return J_; }
  double eps() const { return 1.0 / J_; }
  int sites_per_box() const { return N_ / J_; }
  int box_of_site(int s) const { return s / (N_ / J_); }
  // Half-open-left convention; r is reduced to the torus first.
  int box_of_r(double r) const;
  std::pair<int, int> site_range(int j) const;

 private:
  BoxPartition(int N, int J, bool);
  int N_;
  int J_;
};

// Convergence schedule eps = ell^{(2d+2)/(2d+3)} N^{-1/(2d+3)}.
double convergence_eps(double ell, int N, int d);
// Divisor J of N closest to 1/eps_target in log scale, subject to 1/N < 1/J < ell.
int snap_box_count(double eps_target, int N, double ell);
// Validate eps against N and ell; returns J = 1/eps.
int validate_eps(double eps, int N, double ell);

// T(r) = T0 + amp * cos(2 pi mode r)
struct TemperatureProfile {
  double T0 = 1.0;
  double amp = 0.0;
  int mode = 1;
  double operator()(double r) const;
  void validate() const;
};

struct InitialCondition {
  TemperatureProfile T;
  PotentialSpec potentials = PotentialSpec::harmonic(1.0);
  int d = 1;
};

enum class RAssignment { Grid, UniformInBox, Uniform };

struct PhaseSamples {
  int d = 1;
  std::vector<double> r;
  std::vector<double> x;  // count*d
  std::vector<double> v;  // count*d
  std::size_t size() const { return r.size(); }
};

// Draws one z = (x, v) from the local Gibbs density at temperature T:
// exp(-(|v|^2/2 + U(x) + |x|^2/2)/T).
class LocalGibbsSampler {
 public:
  explicit LocalGibbsSampler(const InitialCondition& ic);
  void draw(double r, RandomStream& rng, double* x, double* v);
  double acceptance_rate() const;
  std::uint64_t attempts() const { return attempts_; }

 private:
  const InitialCondition& ic_;
  std::uint64_t attempts_ = 0;
  std::uint64_t accepted_ = 0;
};

PhaseSamples sample_initial(const InitialCondition& ic, std::size_t count, RAssignment assign,
                            RandomStream& rng, const BoxPartition* partition = nullptr);

// Expected energy density at temperature T for harmonic U: d*T.
double local_gibbs_energy(const InitialCondition& ic, double r);

struct SamplerSelfTest {
  double mean_x_z = 0.0;     // max |mean|/SE over components
  double mean_v_z = 0.0;
  double energy_z = 0.0;     // |mean energy - d*T0|/SE (harmonic, constant T)
  double r_ks = 0.0;         // Kolmogorov-Smirnov statistic of the r-marginal
  double moment_2_2b = 0.0;  // sample mean of |z|^(2+2b)
  bool passed = false;
};

SamplerSelfTest sampler_self_test(const InitialCondition& ic, std::size_t count, double b,
                                  RandomStream& rng);

}  // namespace kac
