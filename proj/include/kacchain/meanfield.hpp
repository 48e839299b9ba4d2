#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kacchain/chain.hpp"
#include "kacchain/kernel.hpp"
#include "kacchain/model.hpp"
#include "kacchain/potential.hpp"
#include "kacchain/rng.hpp"
#include "kacchain/transport.hpp"

namespace kac {

// Rescaled profiles Phi_ell, Gamma_ell on the torus with two derivatives.
class CloudKernel {
 public:
  CloudKernel(KernelProfile phi, KernelProfile gamma, double ell);
  static CloudKernel from(const KacKernel& k);

  double ell() const { return ell_; }
  const KernelProfile& phi_profile() const { return phi_; }
  const KernelProfile& gamma_profile() const { return gamma_; }
  double Phi(double r) const;
  double Gamma(double r) const;
  double Gamma_max() const { return gamma_.peak() / ell_; }

 private:
  KernelProfile phi_, gamma_;
  double ell_;
};

enum class SmoothKernel { Phi, Gamma };

// Samples sorted by rho; rho never changes after construction.
struct MeanFieldCloud {
  int M = 0;
  int d = 1;
  int grid_G = 1024;
  double t = 0.0;
  std::vector<double> rho;
  std::vector<double> x;  // M*d
  std::vector<double> v;  // M*d

  EmpiricalMeasure as_measure() const;
  double kinetic_sum() const;
};

// rho_m = (m + u_m)/M, z ~ f0(rho_m, .).
MeanFieldCloud init_cloud(const InitialCondition& ic, int M, int grid_G, RandomStream& rng);

// Contiguous index ranges of sorted rho within torus distance `half` of `center`.
std::vector<std::pair<int, int>> rho_window(const std::vector<double>& rho, double center,
                                            double half);

// Binned kernel sums S_f(rho) = (1/M') sum_{m'} K(rho - rho_{m'}) f_{m'} on a grid
// of G nodes via per-bin moments (second-order Taylor in the in-bin offset),
// linearly interpolated to arbitrary rho.
class KernelSmoother {
 public:
  KernelSmoother(const KernelProfile& profile, double ell, int G);

  int grid() const { return G_; }
  int bin_of(double r) const {
    if (r < 0.0 || r >= 1.0) r = torus_reduce(r);
    const int g = static_cast<int>(r * G_);
    return g < G_ ? g : G_ - 1;
  }
  double center(int g) const { return (g + 0.5) / G_; }
  // fields: count*k values (sample-major). Returns node values G*k.
  std::vector<double> nodes(const std::vector<double>& rho, const double* fields, int k) const;
  // Node values from per-bin moments sum f, sum delta f, sum delta^2 f (each G*k).
  std::vector<double> convolve(const std::vector<double>& W0, const std::vector<double>& W1,
                               const std::vector<double>& W2, int k, std::size_t count) const;
  // Interpolate node values (G*k) at position r into out[k].
  void interpolate(const std::vector<double>& node_values, int k, double r, double* out) const;

 private:
  KernelProfile profile_;
  double ell_;
  int G_;
  int lag_;
  std::vector<double> K0_, K1_, K2_;  // indexed by lag + lag_
};

enum class ForcePath { Binned, Exact };

// a^m = -(sum_{m'} w_{mm'} grad W(x^m - x^{m'}) + grad U(x^m)), w = Phi_ell(rho^m - rho^{m'})/M,
// with the sums taken over `source` and evaluated at the samples of `target`.
std::vector<double> mf_force(const MeanFieldCloud& target, const MeanFieldCloud& source,
                             const CloudKernel& kernel, const PotentialSpec& potentials,
                             ForcePath path);
std::vector<double> mf_force(const MeanFieldCloud& cloud, const CloudKernel& kernel,
                             const PotentialSpec& potentials, ForcePath path);

enum class JumpMode { Exchange, Resample };

// Partner index m' drawn with probability prop. to Gamma_ell(r - rho_{m'}) over
// `source` by exact rejection within the +-ell/2 window; -1 if the window is empty.
int draw_partner(const MeanFieldCloud& source, const CloudKernel& kernel, double r,
                 RandomStream& rng);

// One jump of sample m. Exchange swaps with the partner (source must be the
// cloud itself); resample copies the partner's velocity. An empty window falls
// back to the sample itself.
void mf_jump(MeanFieldCloud& cloud, int m, JumpMode mode, const MeanFieldCloud* reference,
             const CloudKernel& kernel, RandomStream& rng);

// Frozen snapshots Q_{t_0}, ..., Q_{t_L}, read piecewise-constantly (left value).
struct PicardReference {
  std::vector<MeanFieldCloud> snapshots;
  std::size_t index_at(double t) const;
  double horizon() const { return snapshots.empty() ? 0.0 : snapshots.back().t; }
  void validate() const;
};

using CloudObserver = std::function<void(const MeanFieldCloud&)>;

struct CloudEvolveOptions {
  double dt_max = 1e-2;
  JumpMode mode = JumpMode::Exchange;
  ForcePath path = ForcePath::Binned;
  std::vector<double> snapshot_times;  // stored and passed to observers
  bool keep_snapshots = true;
  std::uint64_t max_events = 0;
};

struct CloudTrajectory {
  std::vector<MeanFieldCloud> snapshots;
  MeanFieldCloud final_cloud;
  std::uint64_t events = 0;       // jump events (a swap counts once)
  std::uint64_t empty_windows = 0;
};

// Strang splitting: half kick, free drift with jumps at their exact times,
// half kick. Exchange mode: gamma_bar*M/2 swaps per unit time; resample mode:
// gamma_bar*M copies per unit time; either way each sample jumps at rate gamma_bar.
CloudTrajectory evolve_cloud(MeanFieldCloud cloud, const CloudKernel& kernel,
                             const PotentialSpec& potentials, double gamma_bar, double horizon,
                             const CloudEvolveOptions& options, RandomStream& rng,
                             const std::vector<CloudObserver>& observers = {});

// Linear problem: forces and jump targets read from the reference, never from
// the evolving cloud; jumps copy a reference velocity.
CloudTrajectory picard_step(const PicardReference& reference, const MeanFieldCloud& initial,
                            const CloudKernel& kernel, const PotentialSpec& potentials,
                            double gamma_bar, double horizon, const CloudEvolveOptions& options,
                            RandomStream& rng);

// Reference frozen at the initial cloud on the given time grid.
PicardReference frozen_reference(const MeanFieldCloud& initial, const std::vector<double>& times);
PicardReference reference_from(const CloudTrajectory& traj);
PathMeasure path_measure(const std::vector<MeanFieldCloud>& snapshots);

struct PicardReport {
  std::vector<double> distances;  // SW(iter_{n}, iter_{n-1}), n = 1..iterations
  std::vector<double> ratios;     // distances[n] / distances[n-1]
};

PicardReport picard_iterate(const MeanFieldCloud& initial, const CloudKernel& kernel,
                            const PotentialSpec& potentials, double gamma_bar, double horizon,
                            double dt_max, int iterations, int boxes, std::uint64_t seed,
                            ForcePath path = ForcePath::Binned);

enum class TestKind { Constant, V1, X1, Kinetic, XdotV, Bump, Custom };

struct GeneratorTestFunction {
  std::string name;
  TestKind kind = TestKind::Custom;
  double radius = 0.0;  // Bump only
  std::function<double(double r, const double* x, const double* v, int d)> value;
  // gradients with respect to x and v
  std::function<void(double r, const double* x, const double* v, int d, double* gx, double* gv)>
      grad;
};

std::vector<GeneratorTestFunction> generator_basket(double bump_radius = 3.0);

// A[nu]psi + gamma_bar S[nu]psi with exact windowed cloud sums; S uses the
// normalized Gamma-weighted velocity law of nu at r.
double generator_apply(const MeanFieldCloud& nu, const GeneratorTestFunction& psi, double r,
                       const double* x, const double* v, const CloudKernel& kernel,
                       const PotentialSpec& potentials, double gamma_bar);
// generator_apply for every sample of nu and every psi: result[psi][m].
std::vector<std::vector<double>> generator_all(const MeanFieldCloud& nu,
                                               const std::vector<GeneratorTestFunction>& psis,
                                               const CloudKernel& kernel,
                                               const PotentialSpec& potentials, double gamma_bar);

struct ResidualStat {
  std::string name;
  double mean = 0.0;
  double se = 0.0;
};

// E[psi(Y_{t+delta}) - psi(Y_t) - delta L[mu_t]psi(Y_t)] over samples of two
// snapshots of the same cloud taken delta apart.
std::vector<ResidualStat> generator_residual(const MeanFieldCloud& at_t,
                                             const MeanFieldCloud& at_t_delta,
                                             const std::vector<GeneratorTestFunction>& psis,
                                             const CloudKernel& kernel,
                                             const PotentialSpec& potentials, double gamma_bar);

}  // namespace kac
