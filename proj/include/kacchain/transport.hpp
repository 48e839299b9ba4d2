#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "kacchain/chain.hpp"
#include "kacchain/model.hpp"

namespace kac {

// Weighted atoms in R^dim; when torus_first is set the first coordinate lives
// on the unit torus. The ground metric is the Euclidean norm of the component
// distances.
struct DiscreteMeasure {
  int dim = 1;
  bool torus_first = false;
  std::vector<double> coords;  // size()*dim
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  const double* atom(std::size_t k) const { return coords.data() + k * dim; }
  double total_mass() const;
  void validate() const;

  static DiscreteMeasure uniform(int dim, std::vector<double> coords, bool torus_first = false);
  // Atoms (r, x, v) of an empirical measure with equal weights.
  static DiscreteMeasure from_empirical(const EmpiricalMeasure& m);
};

double ground_distance(const double* a, const double* b, int dim, bool torus_first);

// Exact assignment (shortest augmenting path). cost is row-major n x n;
// returns col_for_row.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

struct MatchingResult {
  double cost = 0.0;  // mean matched distance = W1
  std::vector<int> permutation;  // atom k of a is matched to permutation[k] of b
};

constexpr std::size_t kMatchingCap = 4096;

MatchingResult w1_matching(const DiscreteMeasure& a, const DiscreteMeasure& b);

struct PlanEntry {
  int source;
  int target;
  double mass;
};

struct CouplingPlan {
  std::vector<PlanEntry> entries;  // nonzero entries of the joint weight matrix
  double cost = 0.0;
};

struct TransportResult {
  double cost = 0.0;
  CouplingPlan plan;
};

// Exact transportation LP by primal network simplex on the complete
// bipartite graph. cost is row-major na x nb.
TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const std::vector<double>& cost);

TransportResult w1_general(const DiscreteMeasure& a, const DiscreteMeasure& b);

// Optimal cost between n equal-weight atoms and m equal-weight atoms for an
// n x m cost matrix (integer-scaled supplies).
double uniform_transport_cost(const std::vector<double>& cost, int n, int m);

struct BoxBoundSchedule {
  double M;
  int n;
};
// M = (N eps)^{1/(4(d+1))}, n = floor(M^2).
BoxBoundSchedule box_bound_schedule(int N, double eps, int d);

struct BoxBoundTerms {
  double cell_term = 0.0;    // sum_j w_j sum_k (1 + sup_k |z|) |Delta_jk|
  double spread_term = 0.0;  // 2 (M/n) max(1, sqrt(2d)/2)
  double box_term = 0.0;     // 2 eps
  double tail_term = 0.0;    // sum over both measures of P(|z|_inf >= M) + E|z| 1{outside}
  double total() const { return cell_term + spread_term + box_term + tail_term; }
};

BoxBoundTerms w1_box_bound_terms(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2,
                                 int boxes, double M, int n);
double w1_box_bound(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2, double eps,
                    double M, int n);

// Box-restricted W1 with the full (r, z) metric inside each box, weighted by
// box mass: sum_j eps W1(mu1|B_j, mu2|B_j). Equal per-box counts use exact
// matching, unequal counts the transportation LP.
double boxwise_w1(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2, int boxes,
                  double mass_tolerance = 1e-9);
double sliced_w1(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2,
                 const BoxPartition& partition, double mass_tolerance = 1e-9);

// Trajectories sampled on a common time grid: z[t][atom*2d + c].
struct PathMeasure {
  int d = 1;
  std::vector<double> r;
  std::vector<std::vector<double>> x;  // per time: size()*d
  std::vector<std::vector<double>> v;
  std::size_t size() const { return r.size(); }
  std::size_t times() const { return x.size(); }
};

// Sliced W1 under the metric sqrt(d_T(r, r')^2 + sup_t |z_t - z'_t|^2).
double sliced_w1_paths(const PathMeasure& mu1, const PathMeasure& mu2, int boxes,
                       double mass_tolerance = 1e-9);

// Coupling map of the lattice measure w = sum_k gamma_k delta_{v^{i+k}} with a
// target measure: Lambda^{i+k} (a cell of length 1/N) is split into consecutive
// subintervals, one per target atom receiving mass from lag k.
struct PiSegment {
  double lo;  // offsets inside the cell, in [0, 1/N]
  double hi;
  int atom;
};

class PiMap {
 public:
  PiMap(int N, std::vector<double> lag_weights, std::vector<std::vector<double>> neighbours,
        DiscreteMeasure target);

  int lags() const { return static_cast<int>(weights_.size()); }
  double plan_cost() const { return plan_cost_; }
  const CouplingPlan& plan() const { return plan_; }
  const std::vector<PiSegment>& segments(int lag) const { return segments_[lag]; }
  // Target atom for a point at offset s in [0, 1/N) of cell `lag`.
  int evaluate(int lag, double offset) const;
  // int |v^{[Nr]} - Pi(r)| sigma(r) dr summed over subintervals.
  double interval_cost() const;
  // sigma-mass of {r : Pi(r) = a} for every target atom a.
  std::vector<double> pushforward() const;
  const DiscreteMeasure& target() const { return target_; }

 private:
  int N_;
  std::vector<double> weights_;
  std::vector<std::vector<double>> vel_;
  DiscreteMeasure target_;
  CouplingPlan plan_;
  double plan_cost_ = 0.0;
  std::vector<std::vector<PiSegment>> segments_;
};

PiMap build_pi_map(int N, const std::vector<double>& lag_weights,
                   const std::vector<std::vector<double>>& neighbours,
                   const DiscreteMeasure& target);

}  // namespace kac
