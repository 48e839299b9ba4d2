#include "kacchain/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "fft_convolver.hpp"
#include "kacchain/error.hpp"

namespace kac {

namespace {
constexpr int kFftThreshold = 256;

inline int wrap(int i, int N) {
  i %= N;
  return i < 0 ? i + N : i;
}
}  // namespace

ChainState ChainState::zeros(int N, int d) {
  if (N < 1 || d < 1) throw InvalidArgument("chain needs N >= 1 and d >= 1");
  ChainState s;
  s.N = N;
  s.d = d;
  s.X.assign(static_cast<std::size_t>(N) * d, 0.0);
  s.V.assign(static_cast<std::size_t>(N) * d, 0.0);
  return s;
}

void ChainState::validate() const {
  const std::size_t n = static_cast<std::size_t>(N) * d;
  if (N < 1 || d < 1 || X.size() != n || V.size() != n) {
    throw InvalidArgument("chain state arrays must have length N*d");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(X[k]) || !std::isfinite(V[k])) {
      throw NumericalError("non-finite chain state at site " + std::to_string(k / d + 1));
    }
  }
}

ChainState chain_from_samples(const PhaseSamples& samples) {
  ChainState s;
  s.N = static_cast<int>(samples.size());
  s.d = samples.d;
  s.X = samples.x;
  s.V = samples.v;
  return s;
}

ChainState sample_chain(const InitialCondition& ic, int N, RandomStream& rng) {
  return chain_from_samples(sample_initial(ic, N, RAssignment::Grid, rng));
}

ForceEngine::ForceEngine(const KacKernel& kernel, const PotentialSpec& potentials, int N, int d,
                         ForceMethod method)
    : kernel_(kernel), pot_(potentials), N_(N), d_(d), method_(method) {
  if (kernel.N() != N) throw InvalidArgument("kernel was built for a different N");
  if (method_ == ForceMethod::Auto) {
    method_ = potentials.harmonic_pair() ? ForceMethod::Convolution : ForceMethod::Naive;
  }
  if (method_ == ForceMethod::Convolution) {
    if (!potentials.harmonic_pair()) {
      throw UnsupportedMethod("convolution forces require a harmonic pair potential W");
    }
    wrapped_.assign(N, 0.0);
    const int L = kernel.max_lag();
    for (int k = -L; k <= L; ++k) wrapped_[wrap(k, N)] += kernel.phi_k(k);
    if (N >= kFftThreshold) {
      fft_ = std::make_unique<FftConvolver>(wrapped_);
      col_in_.resize(N);
      col_out_.resize(N);
    }
  }
}

ForceEngine::~ForceEngine() = default;

void ForceEngine::compute(const double* X, double* F) {
  if (method_ == ForceMethod::Naive) {
    naive(X, F);
  } else if (fft_) {
    // (phi * X)^i = sum_k phi_k X^{i+k}; phi is even so convolution = correlation.
    for (int c = 0; c < d_; ++c) fft_->apply(X + c, d_, F + c, d_);
    const double sum = kernel_.phi_sum();
    std::vector<double> g(d_);
    for (int i = 0; i < N_; ++i) {
      const double* x = X + static_cast<std::size_t>(i) * d_;
      double* f = F + static_cast<std::size_t>(i) * d_;
      pot_.grad_U(x, d_, g.data());
      for (int c = 0; c < d_; ++c) f[c] = f[c] - sum * x[c] - g[c];
    }
  } else {
    windowed(X, F);
  }
  for (std::size_t k = 0; k < static_cast<std::size_t>(N_) * d_; ++k) {
    if (!std::isfinite(F[k])) {
      throw NumericalError("non-finite force at site " + std::to_string(k / d_ + 1));
    }
  }
}

void ForceEngine::naive(const double* X, double* F) const {
  const int L = kernel_.max_lag();
  std::vector<double> diff(d_), g(d_);
  for (int i = 0; i < N_; ++i) {
    const double* xi = X + static_cast<std::size_t>(i) * d_;
    double* f = F + static_cast<std::size_t>(i) * d_;
    pot_.grad_U(xi, d_, g.data());
    for (int c = 0; c < d_; ++c) f[c] = -g[c];
    for (int k = -L; k <= L; ++k) {
      const double p = kernel_.phi_k(k);
      if (p == 0.0 || k == 0) continue;
      const double* xj = X + static_cast<std::size_t>(wrap(i + k, N_)) * d_;
      for (int c = 0; c < d_; ++c) diff[c] = xi[c] - xj[c];
      pot_.grad_W(diff.data(), d_, g.data());
      for (int c = 0; c < d_; ++c) f[c] -= p * g[c];
    }
  }
}

void ForceEngine::windowed(const double* X, double* F) const {
  const double sum = kernel_.phi_sum();
  std::vector<double> g(d_);
  for (int i = 0; i < N_; ++i) {
    const double* xi = X + static_cast<std::size_t>(i) * d_;
    double* f = F + static_cast<std::size_t>(i) * d_;
    pot_.grad_U(xi, d_, g.data());
    for (int c = 0; c < d_; ++c) f[c] = -sum * xi[c] - g[c];
    for (int m = 0; m < N_; ++m) {
      const double p = wrapped_[m];
      if (p == 0.0) continue;
      const double* xj = X + static_cast<std::size_t>(wrap(i + m, N_)) * d_;
      for (int c = 0; c < d_; ++c) f[c] += p * xj[c];
    }
  }
}

std::vector<double> compute_forces(const ChainState& state, const KacKernel& kernel,
                                   const PotentialSpec& potentials, ForceMethod method) {
  ForceEngine engine(kernel, potentials, state.N, state.d, method);
  std::vector<double> F(state.X.size());
  engine.compute(state.X.data(), F.data());
  return F;
}

void hamiltonian_flow(ChainState& state, double duration, double dt_max, ForceEngine& engine,
                      std::vector<double>& F) {
  if (!(duration >= 0.0)) throw InvalidArgument("flow duration must be nonnegative");
  if (!(dt_max > 0.0)) throw InvalidArgument("dt_max must be positive");
  if (duration == 0.0) return;
  const double steps = std::ceil(duration / dt_max * (1.0 - 1e-12));
  const long n = std::max(1L, static_cast<long>(steps));
  const double h = duration / n;
  const std::size_t len = state.X.size();
  double* X = state.X.data();
  double* V = state.V.data();
  for (long s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < len; ++k) {
      V[k] += 0.5 * h * F[k];
      X[k] += h * V[k];
    }
    engine.compute(X, F.data());
    for (std::size_t k = 0; k < len; ++k) V[k] += 0.5 * h * F[k];
  }
  state.t += duration;
}

ChainState hamiltonian_flow(const ChainState& state, double duration, double dt_max,
                            const KacKernel& kernel, const PotentialSpec& potentials) {
  ChainState out = state;
  ForceEngine engine(kernel, potentials, state.N, state.d);
  std::vector<double> F(state.X.size());
  engine.compute(out.X.data(), F.data());
  hamiltonian_flow(out, duration, dt_max, engine, F);
  return out;
}

ExchangeSampler::ExchangeSampler(const KacKernel& kernel, double gamma_bar) : N_(kernel.N()) {
  if (!(gamma_bar >= 0.0)) throw InvalidArgument("gamma_bar must be nonnegative");
  const int L = kernel.max_lag();
  cdf_.resize(L);
  double acc = 0.0;
  for (int k = 1; k <= L; ++k) {
    acc += kernel.gamma_k(k);
    cdf_[k - 1] = acc;
  }
  if (acc > 0.0) {
    for (double& c : cdf_) c /= acc;
    cdf_.back() = 1.0;
  }
  rate_ = gamma_bar * N_ * acc;
}

double ExchangeSampler::wait(RandomStream& rng) const {
  if (!(rate_ > 0.0)) return std::numeric_limits<double>::infinity();
  return rng.exponential(rate_);
}

ExchangeEvent ExchangeSampler::pair(RandomStream& rng) const {
  ExchangeEvent e;
  e.i = static_cast<int>(rng.below(static_cast<std::uint64_t>(N_)));
  const double u = rng.uniform();
  const int k = static_cast<int>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin()) + 1;
  e.j = wrap(e.i + std::min(k, static_cast<int>(cdf_.size())), N_);
  return e;
}

NextExchange next_exchange(const KacKernel& kernel, const ModelParams& params, RandomStream& rng) {
  ExchangeSampler sampler(kernel, params.gamma_bar);
  NextExchange out{sampler.wait(rng), {}};
  if (std::isfinite(out.wait)) out.event = sampler.pair(rng);
  return out;
}

void apply_exchange(ChainState& state, const ExchangeEvent& event) {
  if (event.i == event.j) throw InvalidArgument("an exchange needs two distinct sites");
  if (event.i < 0 || event.j < 0 || event.i >= state.N || event.j >= state.N) {
    throw InvalidArgument("exchange site index out of range");
  }
  double* a = state.V.data() + static_cast<std::size_t>(event.i) * state.d;
  double* b = state.V.data() + static_cast<std::size_t>(event.j) * state.d;
  for (int c = 0; c < state.d; ++c) std::swap(a[c], b[c]);
}

std::vector<double> site_energies(const ChainState& state, const KacKernel& kernel,
                                  const PotentialSpec& potentials) {
  const int N = state.N, d = state.d, L = kernel.max_lag();
  std::vector<double> E(N), diff(d);
  for (int i = 0; i < N; ++i) {
    const double* x = state.X.data() + static_cast<std::size_t>(i) * d;
    const double* v = state.V.data() + static_cast<std::size_t>(i) * d;
    double kin = 0.0;
    for (int c = 0; c < d; ++c) kin += v[c] * v[c];
    double pair = 0.0;
    for (int k = -L; k <= L; ++k) {
      const double p = kernel.phi_k(k);
      if (k == 0 || p == 0.0) continue;
      const double* y = state.X.data() + static_cast<std::size_t>(wrap(i + k, N)) * d;
      for (int c = 0; c < d; ++c) diff[c] = x[c] - y[c];
      pair += p * potentials.W(diff.data(), d);
    }
    E[i] = 0.5 * kin + potentials.U(x, d) + 0.5 * pair;
  }
  return E;
}

double hamiltonian(const ChainState& state, const KacKernel& kernel,
                   const PotentialSpec& potentials) {
  const std::vector<double> E = site_energies(state, kernel, potentials);
  double h = 0.0;
  for (double e : E) h += e;
  return h;
}

EmpiricalMeasure empirical_measure(const ChainState& state) {
  EmpiricalMeasure m;
  m.d = state.d;
  m.r.resize(state.N);
  for (int s = 0; s < state.N; ++s) m.r[s] = state.r(s);
  m.x = state.X;
  m.v = state.V;
  return m;
}

ChainRunResult simulate_chain(const ModelParams& params, const KacKernel& kernel,
                              const PotentialSpec& potentials, ChainState state, double horizon,
                              const ChainRunOptions& options, RandomStream& rng,
                              const std::vector<ChainObserver>& observers) {
  if (!(horizon >= 0.0)) throw InvalidArgument("horizon must be nonnegative");
  state.validate();
  if (state.N != params.N || state.d != params.d) {
    throw InvalidArgument("chain state does not match the model parameters");
  }
  std::vector<double> times = options.sample_times;
  std::sort(times.begin(), times.end());
  for (double t : times) {
    if (t < state.t || t > state.t + horizon * (1.0 + 1e-12)) {
      throw InvalidArgument("sample time outside the simulated window");
    }
  }
  const double t_end = state.t + horizon;
  const double dt_max = params.step_cap();
  ForceEngine engine(kernel, potentials, state.N, state.d, options.method);
  ExchangeSampler sampler(kernel, params.gamma_bar);
  std::vector<double> F(state.X.size());
  engine.compute(state.X.data(), F.data());

  ChainRunResult res;
  if (options.track_energy) res.H0 = hamiltonian(state, kernel, potentials);
  auto sample = [&]() {
    for (const auto& obs : observers) obs(state);
    if (options.track_energy) {
      const double H = hamiltonian(state, kernel, potentials);
      res.sample_energy.push_back(H);
      const double scale = res.H0 != 0.0 ? std::abs(res.H0) : 1.0;
      res.energy_drift = std::max(res.energy_drift, std::abs(H - res.H0) / scale);
    }
  };

  std::size_t next_sample = 0;
  double next_event = state.t + sampler.wait(rng);
  for (;;) {
    while (next_sample < times.size() && times[next_sample] <= state.t) {
      sample();
      ++next_sample;
    }
    const double t_obs =
        next_sample < times.size() ? times[next_sample] : std::numeric_limits<double>::infinity();
    const double stop = std::min({next_event, t_obs, t_end});
    if (stop > state.t) hamiltonian_flow(state, stop - state.t, dt_max, engine, F);
    state.t = stop;
    if (stop == next_event && next_event <= t_end) {
      ExchangeEvent e = sampler.pair(rng);
      e.t = state.t;
      apply_exchange(state, e);
      ++res.events;
      if (options.record_events) res.event_log.push_back(e);
      if (options.max_events != 0 && res.events > options.max_events) {
        throw BudgetExceeded("exchange event budget of " + std::to_string(options.max_events) +
                             " exceeded");
      }
      next_event = state.t + sampler.wait(rng);
      continue;
    }
    if (stop >= t_end && (next_sample >= times.size() || times[next_sample] > t_end)) break;
  }
  while (next_sample < times.size()) {
    sample();
    ++next_sample;
  }
  res.final_state = std::move(state);
  return res;
}

}  // namespace kac
