#include "kacchain/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <tuple>

#include "kacchain/error.hpp"
#include "kacchain/parallel.hpp"

namespace kac {

namespace {

constexpr std::uint64_t kReferenceTag = 0x4ef;
constexpr std::uint64_t kInitialTag = 0x1c;
constexpr std::uint64_t kDynamicsTag = 0xd1;
constexpr int kExactCloudLimit = 8192;

std::pair<double, double> mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  if (v.empty()) return {0.0, 0.0};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / (n - 1.0) / n)};
}

std::vector<double> atoms_of(const MeanFieldCloud& c, int m) {
  std::vector<double> a(1 + 2 * static_cast<std::size_t>(c.d));
  a[0] = c.rho[m];
  for (int k = 0; k < c.d; ++k) {
    a[1 + k] = c.x[static_cast<std::size_t>(m) * c.d + k];
    a[1 + c.d + k] = c.v[static_cast<std::size_t>(m) * c.d + k];
  }
  return a;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ConvergenceParams::validate() const {
  if (Ns.empty()) throw InvalidArgument("convergence experiment needs at least one N");
  for (int N : Ns) {
    if (N < 1) throw InvalidArgument("every N must be positive");
  }
  if (!(ell > 0.0 && ell < 1.0)) throw InvalidArgument("ell must lie in (0, 1)");
  if (!(gamma_bar >= 0.0)) throw InvalidArgument("gamma_bar must be nonnegative");
  if (d < 1) throw InvalidArgument("d must be positive");
  T.validate();
  if (times.empty()) throw InvalidArgument("convergence experiment needs at least one time");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= 0.0) || (k > 0 && !(times[k] > times[k - 1]))) {
      throw InvalidArgument("times must be nonnegative and strictly increasing");
    }
  }
  if (replicas < 8) throw InvalidArgument("standard errors need at least 8 replicas");
  if (reference_M < 1) throw InvalidArgument("reference_M must be positive");
  const int max_N = *std::max_element(Ns.begin(), Ns.end());
  if (!shared_initial && static_cast<double>(reference_M) < 10.0 * max_N) {
    throw InvalidArgument("reference cloud needs M >= 10 * max N (M = " +
                          std::to_string(reference_M) + ", max N = " + std::to_string(max_N) +
                          ")");
  }
  if (cloud_grid < 8) throw InvalidArgument("cloud_grid must be at least 8");
  if (dt_max < 0.0) throw InvalidArgument("dt_max must be nonnegative");
}

const ConvergencePoint& ConvergenceReport::at(int N, double t) const {
  for (const auto& p : points) {
    if (p.N == N && p.t == t) return p;
  }
  throw InvalidArgument("no convergence point for N = " + std::to_string(N));
}

bool ConvergenceReport::non_increasing(double sigmas) const {
  std::vector<double> ts;
  for (const auto& p : points) {
    if (std::find(ts.begin(), ts.end(), p.t) == ts.end()) ts.push_back(p.t);
  }
  for (double t : ts) {
    const ConvergencePoint* prev = nullptr;
    for (const auto& p : points) {
      if (p.t != t) continue;
      if (prev != nullptr) {
        const double se = std::hypot(prev->sliced_se, p.sliced_se);
        if (p.sliced_mean > prev->sliced_mean + sigmas * se) return false;
      }
      prev = &p;
    }
  }
  return true;
}

int convergence_boxes(const ConvergenceParams& p, int N) {
  if (p.eps > 0.0) return validate_eps(p.eps, N, p.ell);
  return snap_box_count(convergence_eps(p.ell, N, p.d), N, p.ell);
}

MeanFieldCloud cloud_from_chain(const ChainState& state, int copies, int grid_G) {
  if (copies < 1) throw InvalidArgument("copies must be positive");
  MeanFieldCloud c;
  c.d = state.d;
  c.M = state.N * copies;
  c.grid_G = grid_G;
  c.rho.resize(c.M);
  c.x.resize(static_cast<std::size_t>(c.M) * c.d);
  c.v.resize(static_cast<std::size_t>(c.M) * c.d);
  for (int s = 0; s < state.N; ++s) {
    for (int j = 0; j < copies; ++j) {
      const int m = s * copies + j;
      c.rho[m] = (s + static_cast<double>(j + 1) / copies) / state.N;
      for (int k = 0; k < c.d; ++k) {
        c.x[static_cast<std::size_t>(m) * c.d + k] = state.X[static_cast<std::size_t>(s) * c.d + k];
        c.v[static_cast<std::size_t>(m) * c.d + k] = state.V[static_cast<std::size_t>(s) * c.d + k];
      }
    }
  }
  return c;
}

double half_cloud_distance(const MeanFieldCloud& cloud, int boxes) {
  if (boxes < 1) throw InvalidArgument("boxes must be positive");
  const BoxPartition part = BoxPartition::with_boxes(boxes, boxes);
  std::vector<std::vector<int>> members(boxes);
  for (int m = 0; m < cloud.M; ++m) members[part.box_of_r(cloud.rho[m])].push_back(m);
  const int dim = 1 + 2 * cloud.d;
  double total = 0.0;
  for (const auto& box : members) {
    std::vector<std::vector<double>> a, b;
    for (std::size_t q = 0; q < box.size(); ++q) {
      (q % 2 == 0 ? a : b).push_back(atoms_of(cloud, box[q]));
    }
    if (a.empty() || b.empty()) continue;
    const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
    std::vector<double> cost(static_cast<std::size_t>(n) * m);
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < m; ++q) {
        cost[static_cast<std::size_t>(p) * m + q] = ground_distance(a[p].data(), b[q].data(), dim, true);
      }
    }
    total += static_cast<double>(box.size()) / cloud.M * uniform_transport_cost(cost, n, m);
  }
  return total;
}

ConvergenceReport convergence_experiment(const ConvergenceParams& p) {
  p.validate();
  const auto phi = KernelProfile::smooth_bump(p.phi_sharpness);
  const auto gam = KernelProfile::smooth_bump(p.gamma_sharpness);
  const CloudKernel ckernel(phi, gam, p.ell);
  InitialCondition ic;
  ic.T = p.T;
  ic.potentials = p.potentials;
  ic.d = p.d;
  const double horizon = p.times.back();
  const std::size_t nt = p.times.size();

  std::vector<int> boxes(p.Ns.size());
  long lcm = 1;
  for (std::size_t k = 0; k < p.Ns.size(); ++k) {
    boxes[k] = convergence_boxes(p, p.Ns[k]);
    lcm = std::lcm(lcm, static_cast<long>(boxes[k]));
  }
  const int finest = *std::max_element(boxes.begin(), boxes.end());

  std::vector<std::unique_ptr<KacKernel>> kernels;
  std::vector<ModelParams> models;
  double expected = 0.0;
  for (int N : p.Ns) {
    ModelParams mp;
    mp.N = N;
    mp.ell = p.ell;
    mp.gamma_bar = p.gamma_bar;
    mp.d = p.d;
    mp.dt_max = p.dt_max;
    mp.seed = p.seed;
    mp.validate();
    models.push_back(mp);
    kernels.push_back(std::make_unique<KacKernel>(phi, gam, p.ell, N));
    expected += p.gamma_bar * N * kernels.back()->gamma_positive_sum() * horizon * p.replicas;
  }

  ConvergenceReport rep;
  int ref_M = static_cast<int>((p.reference_M + lcm - 1) / lcm * lcm);
  if (p.shared_initial) {
    for (int N : p.Ns) {
      const int copies = (p.reference_M + N - 1) / N;
      expected += 0.5 * p.gamma_bar * copies * N * horizon * p.replicas;
    }
    rep.reference = "per-replica clouds copied from the initial chain";
    ref_M = 0;
  } else {
    expected += 0.5 * p.gamma_bar * ref_M * horizon;
    rep.reference = "mean-field cloud, M = " + std::to_string(ref_M);
  }
  if (expected > p.max_events) {
    throw BudgetExceeded("convergence experiment needs about " + std::to_string(expected) +
                         " jump events, above the budget of " + std::to_string(p.max_events));
  }
  rep.reference_M = ref_M;

  ModelParams step_model = models.front();
  const double step = step_model.step_cap();
  const auto run_cloud = [&](MeanFieldCloud c, RandomStream rng, std::uint64_t& events) {
    CloudEvolveOptions opt;
    opt.dt_max = step;
    opt.mode = JumpMode::Exchange;
    opt.path = c.M < kExactCloudLimit ? ForcePath::Exact : ForcePath::Binned;
    opt.snapshot_times = p.times;
    opt.max_events = static_cast<std::uint64_t>(p.max_events);
    auto traj = evolve_cloud(std::move(c), ckernel, p.potentials, p.gamma_bar, horizon, opt, rng);
    if (traj.snapshots.size() != nt) throw NumericalError("cloud snapshot count mismatch");
    events += traj.events;
    return std::move(traj.snapshots);
  };

  std::vector<MeanFieldCloud> reference;
  if (!p.shared_initial) {
    const RandomStream base = RandomStream(p.seed).split(kReferenceTag);
    RandomStream ic_rng = base.split(kInitialTag);
    MeanFieldCloud c0 = init_cloud(ic, ref_M, std::min(p.cloud_grid, ref_M), ic_rng);
    reference = run_cloud(std::move(c0), base.split(kDynamicsTag), rep.events);
    for (const auto& snap : reference) rep.reference_self_distance.push_back(half_cloud_distance(snap, finest));
  }

  struct Task {
    std::vector<double> sliced, bound;
    std::uint64_t events = 0;
  };
  const std::size_t R = p.replicas;
  std::vector<Task> tasks(p.Ns.size() * R);
  parallel_for(tasks.size(), p.workers, [&](std::size_t idx) {
    const std::size_t ni = idx / R, r = idx % R;
    const int N = p.Ns[ni];
    const RandomStream base = RandomStream::for_replica(p.seed, r).split(static_cast<std::uint64_t>(N));
    RandomStream ic_rng = base.split(kInitialTag);
    RandomStream dyn_rng = base.split(kDynamicsTag);
    ChainState s0 = sample_chain(ic, N, ic_rng);
    std::vector<MeanFieldCloud> own;
    Task& out = tasks[idx];
    if (p.shared_initial) {
      const int copies = (p.reference_M + N - 1) / N;
      const int M = copies * N;
      own = run_cloud(cloud_from_chain(s0, copies, std::max(8, std::min(p.cloud_grid, M))),
                      base.split(kReferenceTag), out.events);
    }
    const std::vector<MeanFieldCloud>& ref = p.shared_initial ? own : reference;
    std::vector<EmpiricalMeasure> chain_meas;
    ChainRunOptions opt;
    opt.sample_times = p.times;
    opt.track_energy = false;
    opt.max_events = static_cast<std::uint64_t>(p.max_events);
    const ChainObserver obs = [&](const ChainState& st) { chain_meas.push_back(empirical_measure(st)); };
    const auto res = simulate_chain(models[ni], *kernels[ni], p.potentials, std::move(s0), horizon,
                                    opt, dyn_rng, {obs});
    out.events += res.events;
    if (chain_meas.size() != nt) throw NumericalError("chain sample count mismatch");
    const BoxPartition part = BoxPartition::with_boxes(N, boxes[ni]);
    const double eps = part.eps();
    const auto sched = box_bound_schedule(N, eps, p.d);
    for (std::size_t ti = 0; ti < nt; ++ti) {
      const EmpiricalMeasure cm = ref[ti].as_measure();
      out.sliced.push_back(sliced_w1(chain_meas[ti], cm, part));
      out.bound.push_back(w1_box_bound(chain_meas[ti], cm, eps, sched.M, sched.n));
    }
  });

  for (std::size_t ni = 0; ni < p.Ns.size(); ++ni) {
    for (std::size_t ti = 0; ti < nt; ++ti) {
      ConvergencePoint pt;
      pt.N = p.Ns[ni];
      pt.boxes = boxes[ni];
      pt.eps = 1.0 / boxes[ni];
      pt.t = p.times[ti];
      for (std::size_t r = 0; r < R; ++r) {
        pt.sliced.push_back(tasks[ni * R + r].sliced[ti]);
        pt.bound.push_back(tasks[ni * R + r].bound[ti]);
      }
      std::tie(pt.sliced_mean, pt.sliced_se) = mean_se(pt.sliced);
      std::tie(pt.bound_mean, pt.bound_se) = mean_se(pt.bound);
      rep.points.push_back(std::move(pt));
    }
  }
  for (const Task& t : tasks) rep.events += t.events;
  rep.ratios.assign(nt, {});
  for (std::size_t ti = 0; ti < nt; ++ti) {
    for (std::size_t ni = 1; ni < p.Ns.size(); ++ni) {
      rep.ratios[ti].push_back(rep.points[ni * nt + ti].sliced_mean /
                               rep.points[(ni - 1) * nt + ti].sliced_mean);
    }
  }
  return rep;
}

std::vector<CouplingInstance> coupling_suite(const CouplingSuiteParams& p) {
  if (p.instances < 1 || p.target_atoms < 1) {
    throw InvalidArgument("coupling suite needs positive instance and atom counts");
  }
  const auto b = KernelProfile::smooth_bump();
  const KacKernel kernel(b, b, p.ell, p.N);
  InitialCondition ic;
  ic.T = p.T;
  ic.d = p.d;
  RandomStream rng(p.seed);
  RandomStream chain_rng = rng.split(kInitialTag);
  const ChainState s = sample_chain(ic, p.N, chain_rng);
  LocalGibbsSampler sampler(ic);
  std::vector<double> x(p.d), v(p.d);

  std::vector<int> lags;
  std::vector<double> weights;
  double wsum = 0.0;
  for (int k = -kernel.max_lag(); k <= kernel.max_lag(); ++k) {
    if (kernel.gamma_k(k) > 0.0) {
      lags.push_back(k);
      weights.push_back(kernel.gamma_k(k));
      wsum += kernel.gamma_k(k);
    }
  }
  for (double& w : weights) w /= wsum;

  std::vector<CouplingInstance> out;
  for (int q = 0; q < p.instances; ++q) {
    CouplingInstance inst;
    inst.site = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.N)));
    std::vector<std::vector<double>> nb;
    for (int k : lags) {
      const int site = ((inst.site + k) % p.N + p.N) % p.N;
      nb.emplace_back(s.V.begin() + static_cast<std::ptrdiff_t>(site) * p.d,
                      s.V.begin() + static_cast<std::ptrdiff_t>(site + 1) * p.d);
    }
    DiscreteMeasure target;
    target.dim = p.d;
    for (int a = 0; a < p.target_atoms; ++a) {
      sampler.draw(s.r(inst.site), rng, x.data(), v.data());
      target.coords.insert(target.coords.end(), v.begin(), v.end());
      target.weights.push_back(1.0 / p.target_atoms);
    }
    const PiMap pm = build_pi_map(p.N, weights, nb, target);
    inst.plan_cost = pm.plan_cost();
    inst.interval_cost = pm.interval_cost();
    inst.cost_error = std::abs(inst.interval_cost - inst.plan_cost);
    const auto push = pm.pushforward();
    for (std::size_t a = 0; a < push.size(); ++a) {
      inst.pushforward_error = std::max(inst.pushforward_error, std::abs(push[a] - target.weights[a]));
    }
    out.push_back(inst);
  }
  return out;
}

void write_measure_csv(const std::string& path, const EmpiricalMeasure& m) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write " + path);
  os << "r";
  for (int c = 1; c <= m.d; ++c) os << ",x_" << c;
  for (int c = 1; c <= m.d; ++c) os << ",v_" << c;
  os << ",weight\n";
  const std::string w = fmt(1.0 / static_cast<double>(m.size()));
  for (std::size_t k = 0; k < m.size(); ++k) {
    os << fmt(m.r[k]);
    for (int c = 0; c < m.d; ++c) os << ',' << fmt(m.x[k * m.d + c]);
    for (int c = 0; c < m.d; ++c) os << ',' << fmt(m.v[k * m.d + c]);
    os << ',' << w << '\n';
  }
}

DiscreteMeasure read_measure_csv(const std::string& path, int* d_out) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot read " + path);
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument(path + ": empty measure file");
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) head.push_back(cell);
  }
  const int cols = static_cast<int>(head.size());
  if (cols < 4 || (cols - 2) % 2 != 0 || head.front() != "r" || head.back() != "weight") {
    throw InvalidArgument(path + ": header must be r,x_1..x_d,v_1..v_d,weight");
  }
  const int d = (cols - 2) / 2;
  for (int c = 1; c <= d; ++c) {
    if (head[c] != "x_" + std::to_string(c) || head[d + c] != "v_" + std::to_string(c)) {
      throw InvalidArgument(path + ": header must be r,x_1..x_d,v_1..v_d,weight");
    }
  }
  DiscreteMeasure m;
  m.dim = 1 + 2 * d;
  m.torus_first = true;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double val = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0') {
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": not a number: " + cell);
      }
      if (c < cols - 1) {
        m.coords.push_back(val);
      } else if (c == cols - 1) {
        m.weights.push_back(val);
      }
      ++c;
    }
    if (c != cols) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(cols) + " fields");
    }
  }
  if (m.weights.empty()) throw InvalidArgument(path + ": no atoms");
  const double total = m.total_mass();
  if (std::abs(total - 1.0) > 1e-9) {
    for (double& w : m.weights) w /= total;
  }
  m.validate();
  if (d_out != nullptr) *d_out = d;
  return m;
}

EmpiricalMeasure to_empirical(const DiscreteMeasure& m, int d) {
  if (m.dim != 1 + 2 * d) throw InvalidArgument("measure dimension does not match d");
  const double w0 = m.weights.front();
  for (double w : m.weights) {
    if (std::abs(w - w0) > 1e-12) throw InvalidArgument("box distances need equal atom weights");
  }
  EmpiricalMeasure e;
  e.d = d;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double* a = m.atom(k);
    e.r.push_back(a[0]);
    for (int c = 0; c < d; ++c) e.x.push_back(a[1 + c]);
    for (int c = 0; c < d; ++c) e.v.push_back(a[1 + d + c]);
  }
  return e;
}

MetricsReport measure_metrics(const DiscreteMeasure& a, const DiscreteMeasure& b, int d,
                              int boxes) {
  MetricsReport rep;
  const auto equal_weights = [](const DiscreteMeasure& m) {
    for (double w : m.weights) {
      if (std::abs(w - m.weights.front()) > 1e-12) return false;
    }
    return true;
  };
  if (a.size() == b.size() && a.size() <= kMatchingCap && equal_weights(a) && equal_weights(b)) {
    rep.w1 = w1_matching(a, b).cost;
    rep.w1_method = "matching";
  } else if (a.size() * b.size() <= kMatchingCap * kMatchingCap) {
    rep.w1 = w1_general(a, b).cost;
    rep.w1_method = "transport";
  } else if (boxes > 0) {
    rep.has_w1 = false;
  } else {
    throw UnsupportedMethod("measures too large for exact W1; use a box count for the sliced distance");
  }
  if (boxes > 0) {
    const EmpiricalMeasure ea = to_empirical(a, d), eb = to_empirical(b, d);
    rep.has_sliced = true;
    rep.sliced = boxwise_w1(ea, eb, boxes);
    const double eps = 1.0 / boxes;
    const auto sched = box_bound_schedule(static_cast<int>(ea.size()), eps, d);
    rep.has_bound = true;
    rep.bound = w1_box_bound(ea, eb, eps, sched.M, sched.n);
  }
  return rep;
}

}  // namespace kac
