#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kacchain/chain.hpp"
#include "kacchain/kernel.hpp"
#include "kacchain/meanfield.hpp"
#include "kacchain/model.hpp"
#include "kacchain/potential.hpp"

namespace kac {

enum class ProfileSource { Chain, Cloud };

// Bin g covers ((g)/G, (g+1)/G]; centers (g + 1/2)/G.
int profile_bin(double r, int G);

struct EnergyProfile {
  int grid_G = 0;
  ProfileSource source = ProfileSource::Chain;
  std::vector<double> centers;
  std::vector<double> mean;
  std::vector<double> se;
  std::vector<double> mass;  // population fraction per bin
  std::size_t population = 0;
  double total = 0.0;        // summed energy over the population

  // sum_g mass_g mean_g
  double weighted_mean() const;
};

// Chain source: site energies E^i binned by r = i/N.
EnergyProfile energy_profile(const ChainState& state, const KacKernel& kernel,
                             const PotentialSpec& potentials, int grid_G);
// Cloud source: e = |v|^2/2 + |x|^2/4 + S2(rho)/4 + U(x), S2 the Phi-smoothed |x'|^2.
EnergyProfile energy_profile(const MeanFieldCloud& cloud, const CloudKernel& kernel,
                             const PotentialSpec& potentials, int grid_G);
std::vector<double> cloud_energies(const MeanFieldCloud& cloud, const CloudKernel& kernel,
                                   const PotentialSpec& potentials);

struct CurrentField {
  int grid_G = 0;
  // G x G row-major; entry (g, h) is the current from bin g to bin h.
  std::vector<double> j_a, j_s;
  std::vector<double> j_a_se, j_s_se;
  // Kernel-weighted net outflow per bin: (1/G) sum_h Phi(r_h - r_g) j_a(g, h), same with Gamma.
  std::vector<double> net_a, net_s;
  double a(int g, int h) const { return j_a[static_cast<std::size_t>(g) * grid_G + h]; }
  double s(int g, int h) const { return j_s[static_cast<std::size_t>(g) * grid_G + h]; }
};

CurrentField energy_currents(const MeanFieldCloud& cloud, const CloudKernel& kernel,
                             const PotentialSpec& potentials, int grid_G);
// Currents from per-bin first moments m_xv = E[v.x], kappa = E[|v|^2/2].
CurrentField currents_from_moments(const std::vector<double>& m_xv,
                                   const std::vector<double>& m_xv_se,
                                   const std::vector<double>& kappa,
                                   const std::vector<double>& kappa_se, const CloudKernel* kernel);

struct HeatProfile {
  std::vector<double> values;
  double D = 0.0;
  double t = 0.0;
  double integral() const;  // periodic trapezoid
};

// Spectral solution of de/dt = D e'' on a periodic grid.
HeatProfile heat_solve(const std::vector<double>& e0, double D, double t);

struct TestProfile {
  std::string name;
  std::function<double(double)> g;
  std::function<double(double)> g2;  // second derivative
};

TestProfile test_zero();
TestProfile test_cos(int mode);
TestProfile test_sin(int mode);
TestProfile test_constant();  // g = 1, g'' = 0

struct ScaledIntegral {
  double value = 0.0;
  double se = 0.0;
};

// Time integrals in scaled time s = tau * ell^2 by trapezoid over observed snapshots:
//   equipartition: int ds E[G(r)(|v|^2/2 - e/2)]
//   hamiltonian current: int ds E[x.v g''(r)/2]
// The first observation fixes s = 0.
class DiffusiveRecorder {
 public:
  DiffusiveRecorder(const CloudKernel& kernel, const PotentialSpec& potentials, double ell,
                    TestProfile G, TestProfile g);

  void observe(const MeanFieldCloud& cloud);
  double scaled_time() const { return s_last_ - s_first_; }
  std::size_t observations() const { return count_; }
  ScaledIntegral equipartition() const;
  ScaledIntegral hamiltonian_current() const;

 private:
  const CloudKernel& kernel_;
  const PotentialSpec& potentials_;
  double ell_;
  TestProfile G_, g_;
  std::size_t count_ = 0;
  double s_first_ = 0.0, s_last_ = 0.0;
  std::vector<double> prev_eq_, prev_hc_, acc_eq_, acc_hc_;
};

ScaledIntegral equipartition_residual(const std::vector<MeanFieldCloud>& trajectory,
                                      const TestProfile& G, double t, double ell,
                                      const CloudKernel& kernel, const PotentialSpec& potentials);
ScaledIntegral hamiltonian_current_check(const std::vector<MeanFieldCloud>& trajectory,
                                         const TestProfile& g, double t, double ell,
                                         const CloudKernel& kernel,
                                         const PotentialSpec& potentials);

enum class DiffusionEngine { Chain, Cloud };

struct DiffusionParams {
  int N = 20000;
  double ell = 0.1;
  double gamma_bar = 1.0;
  int d = 1;
  TemperatureProfile T{1.0, 0.5, 1};
  PotentialSpec potentials = PotentialSpec::harmonic(1.0);
  double phi_sharpness = 1.0;
  double gamma_sharpness = 1.0;
  std::vector<double> times{0.05, 0.1, 0.2};  // scaled; t = 0 is always added
  int replicas = 1;
  int workers = 1;
  int grid_G = 64;
  double dt_max = 0.0;  // 0: default for ell
  DiffusionEngine engine = DiffusionEngine::Chain;
  int cloud_M = 0;      // 0: N
  int cloud_grid = 1024;
  std::uint64_t seed = 1;
  double max_events = 2e9;

  void validate() const;
};

struct DiffusionTimeReport {
  double t = 0.0;  // scaled
  std::vector<double> profile, profile_se, reference;
  double l1_error = 0.0;
  std::vector<std::string> tested_names;
  std::vector<double> tested_measured, tested_se, tested_reference;
  double mode_amplitude = 0.0;
  double mode_amplitude_se = 0.0;
  double reference_amplitude = 0.0;
};

struct DiffusionReport {
  double c_gamma = 0.0;
  double D = 0.0;
  double expected_rate = 0.0;  // D (2 pi m)^2
  double fitted_rate = 0.0;    // NaN with fewer than two usable points
  int fit_points = 0;
  double energy_drift = 0.0;   // worst relative drift over replicas
  std::uint64_t events = 0;
  std::vector<double> centers;
  std::vector<DiffusionTimeReport> times;
};

DiffusionReport diffusion_experiment(const DiffusionParams& params);

// Least-squares slope of log(a) against t over points with a > 5 se; returns
// -slope and the number of points used.
std::pair<double, int> fit_decay_rate(const std::vector<double>& t, const std::vector<double>& a,
                                      const std::vector<double>& se);

struct EquipartitionParams {
  int M = 1000000;
  double ell = 0.1;
  double gamma_bar = 1.0;
  int d = 1;
  TemperatureProfile T{1.0, 0.5, 1};
  PotentialSpec potentials = PotentialSpec::harmonic(1.0);
  double t = 0.1;                // scaled
  double dt_max = 0.01;
  double snapshot_spacing = 0.05;  // physical time
  int grid_G = 1024;
  std::uint64_t seed = 1;
};

struct EquipartitionReport {
  ScaledIntegral equipartition;
  ScaledIntegral hamiltonian_current;
  std::uint64_t events = 0;
};

// Cloud run at diffusive scale with G = g = cos(2 pi r).
EquipartitionReport equipartition_experiment(const EquipartitionParams& params);

}  // namespace kac
