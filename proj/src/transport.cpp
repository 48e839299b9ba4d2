#include "kacchain/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "kacchain/error.hpp"
#include "network_simplex.hpp"

namespace kac {

double DiscreteMeasure::total_mass() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

void DiscreteMeasure::validate() const {
  if (dim < 1) throw InvalidArgument("measure dimension must be positive");
  if (coords.size() != weights.size() * static_cast<std::size_t>(dim)) {
    throw InvalidArgument("measure coordinates do not match the weight count");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("measure weights must be >= 0");
  }
  for (double c : coords) {
    if (!std::isfinite(c)) throw InvalidArgument("measure atoms must be finite");
  }
}

DiscreteMeasure DiscreteMeasure::uniform(int dim, std::vector<double> coords, bool torus_first) {
  DiscreteMeasure m;
  m.dim = dim;
  m.torus_first = torus_first;
  m.coords = std::move(coords);
  const std::size_t n = m.coords.size() / dim;
  m.weights.assign(n, 1.0 / static_cast<double>(n));
  return m;
}

DiscreteMeasure DiscreteMeasure::from_empirical(const EmpiricalMeasure& e) {
  const int d = e.d;
  const std::size_t n = e.size();
  std::vector<double> c(n * (2 * d + 1));
  for (std::size_t k = 0; k < n; ++k) {
    double* p = c.data() + k * (2 * d + 1);
    p[0] = e.r[k];
    for (int j = 0; j < d; ++j) {
      p[1 + j] = e.x[k * d + j];
      p[1 + d + j] = e.v[k * d + j];
    }
  }
  return uniform(2 * d + 1, std::move(c), true);
}

double ground_distance(const double* a, const double* b, int dim, bool torus_first) {
  double s = 0.0;
  int c = 0;
  if (torus_first) {
    const double t = torus_dist(a[0], b[0]);
    s = t * t;
    c = 1;
  }
  for (; c < dim; ++c) {
    const double q = a[c] - b[c];
    s += q * q;
  }
  return std::sqrt(s);
}

std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
  if (n < 1) return {};
  if (cost.size() != static_cast<std::size_t>(n) * n) {
    throw InvalidArgument("assignment cost matrix must be n x n");
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n, 0.0), v(n, 0.0), shortest(n);
  std::vector<int> path(n, -1), col4row(n, -1), row4col(n, -1), remaining(n);
  std::vector<char> SR(n), SC(n);
  for (int cur = 0; cur < n; ++cur) {
    double min_val = 0.0;
    int i = cur;
    int num_remaining = n;
    for (int it = 0; it < n; ++it) remaining[it] = n - it - 1;
    std::fill(SR.begin(), SR.end(), 0);
    std::fill(SC.begin(), SC.end(), 0);
    std::fill(shortest.begin(), shortest.end(), inf);
    int sink = -1;
    while (sink == -1) {
      int index = -1;
      double lowest = inf;
      SR[i] = 1;
      const double* row = cost.data() + static_cast<std::size_t>(i) * n;
      for (int it = 0; it < num_remaining; ++it) {
        const int j = remaining[it];
        const double r = min_val + row[j] - u[i] - v[j];
        if (r < shortest[j]) {
          path[j] = i;
          shortest[j] = r;
        }
        if (shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == -1)) {
          lowest = shortest[j];
          index = it;
        }
      }
      min_val = lowest;
      if (!std::isfinite(min_val)) throw NumericalError("assignment problem is infeasible");
      const int j = remaining[index];
      if (row4col[j] == -1) {
        sink = j;
      } else {
        i = row4col[j];
      }
      SC[j] = 1;
      remaining[index] = remaining[--num_remaining];
    }
    u[cur] += min_val;
    for (int r = 0; r < n; ++r) {
      if (SR[r] && r != cur) u[r] += min_val - shortest[col4row[r]];
    }
    for (int c = 0; c < n; ++c) {
      if (SC[c]) v[c] -= min_val - shortest[c];
    }
    int j = sink;
    for (;;) {
      const int r = path[j];
      row4col[j] = r;
      std::swap(col4row[r], j);
      if (r == cur) break;
    }
  }
  return col4row;
}

namespace {

void check_compatible(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  a.validate();
  b.validate();
  if (a.dim != b.dim || a.torus_first != b.torus_first) {
    throw InvalidArgument("measures live on different spaces");
  }
  if (a.size() == 0 || b.size() == 0) throw InvalidArgument("measures must be nonempty");
}

std::vector<double> cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  std::vector<double> c(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      c[i * b.size() + j] = ground_distance(a.atom(i), b.atom(j), a.dim, a.torus_first);
    }
  }
  return c;
}

}  // namespace

MatchingResult w1_matching(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  check_compatible(a, b);
  const std::size_t n = a.size();
  if (b.size() != n) throw InvalidArgument("matching needs equal atom counts");
  if (n > kMatchingCap) {
    throw InvalidArgument("matching is capped at " + std::to_string(kMatchingCap) +
                          " atoms; use w1_box_bound or sliced_w1 for larger measures");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(a.weights[k] - 1.0 / n) > 1e-12 || std::abs(b.weights[k] - 1.0 / n) > 1e-12) {
      throw InvalidArgument("matching needs equal weights");
    }
  }
  const std::vector<double> c = cost_matrix(a, b);
  MatchingResult res;
  res.permutation = solve_assignment(c, static_cast<int>(n));
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += c[i * n + res.permutation[i]];
  res.cost = s / static_cast<double>(n);
  return res;
}

TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const std::vector<double>& cost) {
  NetworkSimplex ns(supply, demand, cost);
  if (!ns.run()) throw NumericalError("transport LP infeasible: total masses differ");
  TransportResult res;
  const int nb = ns.sinks();
  for (int i = 0; i < ns.sources(); ++i) {
    for (int j = 0; j < nb; ++j) {
      const double f = ns.flow(i * nb + j);
      if (f > 0.0) res.plan.entries.push_back({i, j, f});
    }
  }
  res.cost = ns.total_cost();
  res.plan.cost = res.cost;
  return res;
}

TransportResult w1_general(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  check_compatible(a, b);
  const double ma = a.total_mass(), mb = b.total_mass();
  if (std::abs(ma - mb) > 1e-9) {
    throw InvalidArgument("total masses differ by " + std::to_string(std::abs(ma - mb)));
  }
  std::vector<double> demand(b.weights);
  if (mb > 0.0) {
    for (double& w : demand) w *= ma / mb;
  }
  return solve_transport(a.weights, demand, cost_matrix(a, b));
}

double uniform_transport_cost(const std::vector<double>& cost, int n, int m) {
  if (n == m) {
    const std::vector<int> p = solve_assignment(cost, n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i) * n + p[i]];
    return s / n;
  }
  const std::vector<double> supply(n, static_cast<double>(m)), demand(m, static_cast<double>(n));
  NetworkSimplex ns(supply, demand, cost);
  if (!ns.run()) throw NumericalError("uniform transport LP did not reach feasibility");
  return ns.total_cost() / (static_cast<double>(n) * m);
}

BoxBoundSchedule box_bound_schedule(int N, double eps, int d) {
  const double M = std::pow(N * eps, 1.0 / (4.0 * (d + 1)));
  return {M, std::max(1, static_cast<int>(std::floor(M * M)))};
}

namespace {

struct BoxGroups {
  std::vector<std::vector<int>> members;
};

BoxGroups group_by_box(const std::vector<double>& r, int boxes) {
  const BoxPartition p = BoxPartition::with_boxes(boxes, boxes);
  BoxGroups g;
  g.members.resize(boxes);
  for (std::size_t k = 0; k < r.size(); ++k) {
    g.members[p.box_of_r(r[k])].push_back(static_cast<int>(k));
  }
  return g;
}

void check_box_masses(const BoxGroups& a, std::size_t na, const BoxGroups& b, std::size_t nb,
                      double tol) {
  for (std::size_t j = 0; j < a.members.size(); ++j) {
    const double ma = static_cast<double>(a.members[j].size()) / na;
    const double mb = static_cast<double>(b.members[j].size()) / nb;
    if (std::abs(ma - mb) > tol) {
      throw InvalidArgument("box " + std::to_string(j) + " masses differ (" + std::to_string(ma) +
                            " vs " + std::to_string(mb) + ")");
    }
    if ((a.members[j].empty()) != (b.members[j].empty())) {
      throw InvalidArgument("box " + std::to_string(j) + " is empty in only one measure");
    }
  }
}

template <class Dist>
double boxwise_cost(const BoxGroups& ga, std::size_t na, const BoxGroups& gb, Dist dist) {
  double total = 0.0;
  for (std::size_t j = 0; j < ga.members.size(); ++j) {
    const auto& ia = ga.members[j];
    const auto& ib = gb.members[j];
    if (ia.empty()) continue;
    const int n = static_cast<int>(ia.size()), m = static_cast<int>(ib.size());
    std::vector<double> c(static_cast<std::size_t>(n) * m);
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < m; ++q) c[static_cast<std::size_t>(p) * m + q] = dist(ia[p], ib[q]);
    }
    total += static_cast<double>(n) / na * uniform_transport_cost(c, n, m);
  }
  return total;
}

}  // namespace

double boxwise_w1(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2, int boxes,
                  double mass_tolerance) {
  if (mu1.d != mu2.d) throw InvalidArgument("measures have different dimensions");
  if (mu1.size() == 0 || mu2.size() == 0) throw InvalidArgument("measures must be nonempty");
  const BoxGroups ga = group_by_box(mu1.r, boxes), gb = group_by_box(mu2.r, boxes);
  check_box_masses(ga, mu1.size(), gb, mu2.size(), mass_tolerance);
  const int d = mu1.d;
  return boxwise_cost(ga, mu1.size(), gb, [&](int p, int q) {
    const double t = torus_dist(mu1.r[p], mu2.r[q]);
    double s = t * t;
    for (int c = 0; c < d; ++c) {
      const double dx = mu1.x[p * d + c] - mu2.x[q * d + c];
      const double dv = mu1.v[p * d + c] - mu2.v[q * d + c];
      s += dx * dx + dv * dv;
    }
    return std::sqrt(s);
  });
}

double sliced_w1(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2,
                 const BoxPartition& partition, double mass_tolerance) {
  return boxwise_w1(mu1, mu2, partition.boxes(), mass_tolerance);
}

double sliced_w1_paths(const PathMeasure& mu1, const PathMeasure& mu2, int boxes,
                       double mass_tolerance) {
  if (mu1.d != mu2.d || mu1.times() != mu2.times()) {
    throw InvalidArgument("path measures must share dimension and time grid");
  }
  if (mu1.times() == 0) throw InvalidArgument("path measures need at least one time");
  const BoxGroups ga = group_by_box(mu1.r, boxes), gb = group_by_box(mu2.r, boxes);
  check_box_masses(ga, mu1.size(), gb, mu2.size(), mass_tolerance);
  const int d = mu1.d;
  const std::size_t T = mu1.times();
  return boxwise_cost(ga, mu1.size(), gb, [&](int p, int q) {
    double sup = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
        const double dx = mu1.x[t][p * d + c] - mu2.x[t][q * d + c];
        const double dv = mu1.v[t][p * d + c] - mu2.v[t][q * d + c];
        s += dx * dx + dv * dv;
      }
      sup = std::max(sup, s);
    }
    const double tr = torus_dist(mu1.r[p], mu2.r[q]);
    return std::sqrt(tr * tr + sup);
  });
}

BoxBoundTerms w1_box_bound_terms(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2,
                                 int boxes, double M, int n) {
  if (mu1.d != mu2.d) throw InvalidArgument("measures have different dimensions");
  if (!(M > 0.0) || n < 1) throw InvalidArgument("box bound needs M > 0 and n >= 1");
  const int d = mu1.d, D = 2 * d;
  const int side = 2 * n;
  if (D * std::log2(static_cast<double>(side)) > 62.0) {
    throw InvalidArgument("cube grid too fine for the cell index");
  }
  const double h = M / n;
  const BoxGroups ga = group_by_box(mu1.r, boxes), gb = group_by_box(mu2.r, boxes);
  for (int j = 0; j < boxes; ++j) {
    if (ga.members[j].empty() || gb.members[j].empty()) {
      throw InvalidArgument("box bound rejects empty boxes (box " + std::to_string(j) + ")");
    }
  }
  check_box_masses(ga, mu1.size(), gb, mu2.size(), 1e-9);

  BoxBoundTerms t;
  t.spread_term = 2.0 * h * std::max(1.0, std::sqrt(static_cast<double>(D)) / 2.0);
  t.box_term = 2.0 / boxes;
  std::vector<int> cell(D);
  auto locate = [&](const EmpiricalMeasure& mu, int k, double& norm) -> long long {
    double s = 0.0;
    bool inside = true;
    for (int c = 0; c < D; ++c) {
      const double z = c < d ? mu.x[k * d + c] : mu.v[k * d + (c - d)];
      s += z * z;
      const double a = std::floor((z + M) / h);
      if (!(a >= 0.0 && a < side)) inside = false;
      cell[c] = inside ? static_cast<int>(a) : 0;
    }
    norm = std::sqrt(s);
    if (!inside) return -1;
    long long key = 0;
    for (int c = 0; c < D; ++c) key = key * side + cell[c];
    return key;
  };
  auto cell_sup = [&](long long key) {
    double s = 0.0;
    for (int c = D - 1; c >= 0; --c) {
      const int a = static_cast<int>(key % side);
      key /= side;
      const double lo = -M + a * h, hi = lo + h;
      const double m = std::max(std::abs(lo), std::abs(hi));
      s += m * m;
    }
    return std::sqrt(s);
  };
  for (int j = 0; j < boxes; ++j) {
    std::unordered_map<long long, std::pair<long long, long long>> counts;
    const double w1 = static_cast<double>(ga.members[j].size()) / mu1.size();
    const double w2 = static_cast<double>(gb.members[j].size()) / mu2.size();
    const double inv1 = 1.0 / ga.members[j].size(), inv2 = 1.0 / gb.members[j].size();
    for (int k : ga.members[j]) {
      double norm;
      const long long key = locate(mu1, k, norm);
      if (key < 0) {
        t.tail_term += w1 * inv1 * (1.0 + norm);
      } else {
        ++counts[key].first;
      }
    }
    for (int k : gb.members[j]) {
      double norm;
      const long long key = locate(mu2, k, norm);
      if (key < 0) {
        t.tail_term += w2 * inv2 * (1.0 + norm);
      } else {
        ++counts[key].second;
      }
    }
    double cell_sum = 0.0;
    for (const auto& [key, c] : counts) {
      cell_sum += (1.0 + cell_sup(key)) * std::abs(c.first * inv1 - c.second * inv2);
    }
    t.cell_term += w1 * cell_sum;
  }
  return t;
}

double w1_box_bound(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2, double eps,
                    double M, int n) {
  const long J = std::lround(1.0 / eps);
  if (J < 1 || std::abs(J * eps - 1.0) > 1e-9) throw InvalidArgument("eps^-1 must be an integer");
  return w1_box_bound_terms(mu1, mu2, static_cast<int>(J), M, n).total();
}

PiMap::PiMap(int N, std::vector<double> lag_weights, std::vector<std::vector<double>> neighbours,
             DiscreteMeasure target)
    : N_(N), weights_(std::move(lag_weights)), vel_(std::move(neighbours)),
      target_(std::move(target)) {
  if (N < 1) throw InvalidArgument("PiMap needs N >= 1");
  if (weights_.size() != vel_.size() || weights_.empty()) {
    throw InvalidArgument("one neighbour velocity per lag weight is required");
  }
  target_.validate();
  const int d = target_.dim;
  if (target_.torus_first) throw InvalidArgument("PiMap targets live in velocity space");
  std::vector<double> coords;
  for (const auto& v : vel_) {
    if (static_cast<int>(v.size()) != d) throw InvalidArgument("velocity dimension mismatch");
    coords.insert(coords.end(), v.begin(), v.end());
  }
  DiscreteMeasure source;
  source.dim = d;
  source.coords = std::move(coords);
  source.weights = weights_;
  const TransportResult tr = w1_general(source, target_);
  plan_ = tr.plan;
  plan_cost_ = tr.cost;

  // Canonical (lexicographic) order of target atoms.
  std::vector<int> order(target_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::lexicographical_compare(target_.atom(a), target_.atom(a) + d, target_.atom(b),
                                        target_.atom(b) + d) ||
           (!std::lexicographical_compare(target_.atom(b), target_.atom(b) + d, target_.atom(a),
                                          target_.atom(a) + d) &&
            a < b);
  });
  std::vector<int> rank(target_.size());
  for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<int>(k);

  std::vector<std::vector<PlanEntry>> by_lag(weights_.size());
  for (const PlanEntry& e : plan_.entries) by_lag[e.source].push_back(e);
  segments_.resize(weights_.size());
  const double cell = 1.0 / N_;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    auto& rows = by_lag[k];
    if (rows.empty()) continue;
    if (!(weights_[k] > 0.0)) {
      throw NumericalError("coupling plan puts mass on a lag with zero weight");
    }
    std::sort(rows.begin(), rows.end(),
              [&](const PlanEntry& a, const PlanEntry& b) { return rank[a.target] < rank[b.target]; });
    double lo = 0.0;
    for (const PlanEntry& e : rows) {
      const double len = cell * e.mass / weights_[k];
      segments_[k].push_back({lo, lo + len, e.target});
      lo += len;
    }
  }
}

int PiMap::evaluate(int lag, double offset) const {
  const auto& segs = segments_.at(lag);
  if (segs.empty()) throw InvalidArgument("lag carries no mass");
  for (const PiSegment& s : segs) {
    if (offset >= s.lo && offset < s.hi) return s.atom;
  }
  return segs.back().atom;
}

double PiMap::interval_cost() const {
  const int d = target_.dim;
  double total = 0.0;
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const double density = N_ * weights_[k];
    for (const PiSegment& s : segments_[k]) {
      const double dist = ground_distance(vel_[k].data(), target_.atom(s.atom), d, false);
      total += density * (s.hi - s.lo) * dist;
    }
  }
  return total;
}

std::vector<double> PiMap::pushforward() const {
  std::vector<double> mass(target_.size(), 0.0);
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const double density = N_ * weights_[k];
    for (const PiSegment& s : segments_[k]) mass[s.atom] += density * (s.hi - s.lo);
  }
  return mass;
}

PiMap build_pi_map(int N, const std::vector<double>& lag_weights,
                   const std::vector<std::vector<double>>& neighbours,
                   const DiscreteMeasure& target) {
  return PiMap(N, lag_weights, neighbours, target);
}

}  // namespace kac
