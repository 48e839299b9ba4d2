#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kacchain/chain.hpp"
#include "kacchain/meanfield.hpp"
#include "kacchain/model.hpp"
#include "kacchain/potential.hpp"
#include "kacchain/transport.hpp"

namespace kac {

struct ConvergenceParams {
  std::vector<int> Ns{256, 1024, 4096};
  double ell = 0.1;
  double gamma_bar = 1.0;
  int d = 1;
  TemperatureProfile T{1.0, 0.5, 1};
  PotentialSpec potentials = PotentialSpec::harmonic(1.0);
  double phi_sharpness = 1.0;
  double gamma_sharpness = 1.0;
  std::vector<double> times{1.0};  // physical
  int replicas = 8;
  int workers = 1;
  int reference_M = 100000;  // rounded up to a multiple of every box count
  int cloud_grid = 1024;
  double eps = 0.0;          // 0: eps = ell^{(2d+2)/(2d+3)} N^{-1/(2d+3)} snapped per N
  // Reference cloud built from each replica's own initial chain, each site
  // copied ceil(reference_M/N) times inside its cell.
  bool shared_initial = false;
  double dt_max = 0.0;
  std::uint64_t seed = 1;
  double max_events = 2e9;

  void validate() const;
};

struct ConvergencePoint {
  int N = 0;
  int boxes = 0;
  double eps = 0.0;
  double t = 0.0;
  std::vector<double> sliced;  // per replica
  std::vector<double> bound;
  double sliced_mean = 0.0, sliced_se = 0.0;
  double bound_mean = 0.0, bound_se = 0.0;
};

struct ConvergenceReport {
  int reference_M = 0;
  std::string reference;  // description of the reference cloud
  // Per time: W1 between two halves of the reference, sliced on the finest boxes.
  std::vector<double> reference_self_distance;
  std::vector<ConvergencePoint> points;  // N-major, then time
  // Per time, sliced_mean(N_{k+1}) / sliced_mean(N_k).
  std::vector<std::vector<double>> ratios;
  std::uint64_t events = 0;

  const ConvergencePoint& at(int N, double t) const;
  // True when every step in N keeps the mean within `sigmas` combined SE of non-increasing.
  bool non_increasing(double sigmas) const;
};

int convergence_boxes(const ConvergenceParams& params, int N);
ConvergenceReport convergence_experiment(const ConvergenceParams& params);

// Cloud of copies*N samples: site s contributes copies at rho = (s + (j+1)/copies)/N.
MeanFieldCloud cloud_from_chain(const ChainState& state, int copies, int grid_G);
// Sliced W1 between alternating halves of a cloud, each box split separately.
double half_cloud_distance(const MeanFieldCloud& cloud, int boxes);

struct CouplingInstance {
  int site = 0;
  double plan_cost = 0.0;
  double interval_cost = 0.0;
  double cost_error = 0.0;        // |interval_cost - plan_cost|
  double pushforward_error = 0.0;  // max over target atoms
};

struct CouplingSuiteParams {
  int N = 512;
  double ell = 0.05;
  int d = 1;
  TemperatureProfile T{1.0, 0.5, 1};
  int instances = 50;
  int target_atoms = 8;
  std::uint64_t seed = 1;
};

// Coupling maps between the lattice velocity measure sum_k gamma_k delta_{v^{i+k}}
// of a sampled chain and an empirical local Gibbs velocity law at r = i/N.
std::vector<CouplingInstance> coupling_suite(const CouplingSuiteParams& params);

// CSV with header r,x_1..x_d,v_1..v_d,weight.
void write_measure_csv(const std::string& path, const EmpiricalMeasure& m);
DiscreteMeasure read_measure_csv(const std::string& path, int* d_out = nullptr);
// Equal-weight atoms only; throws InvalidArgument otherwise.
EmpiricalMeasure to_empirical(const DiscreteMeasure& m, int d);

struct MetricsReport {
  bool has_w1 = true;
  double w1 = 0.0;
  std::string w1_method;  // matching or transport
  bool has_sliced = false;
  double sliced = 0.0;
  bool has_bound = false;
  double bound = 0.0;
};

// boxes = 0 skips the box-based distances.
MetricsReport measure_metrics(const DiscreteMeasure& a, const DiscreteMeasure& b, int d,
                              int boxes);

}  // namespace kac
