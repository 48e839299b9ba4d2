#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "kacchain/kernel.hpp"
#include "kacchain/model.hpp"
#include "kacchain/potential.hpp"
#include "kacchain/rng.hpp"

namespace kac {

// Site s (0-based) sits at r = (s+1)/N. X and V are stored site-major: X[s*d + c].
struct ChainState {
  double t = 0.0;
  int N = 0;
  int d = 1;
  std::vector<double> X;
  std::vector<double> V;

  static ChainState zeros(int N, int d);
  double r(int s) const { return static_cast<double>(s + 1) / N; }
  void validate() const;
};

ChainState chain_from_samples(const PhaseSamples& samples);
ChainState sample_chain(const InitialCondition& ic, int N, RandomStream& rng);

// Equal-weight atoms (r, x, v).
using EmpiricalMeasure = PhaseSamples;

struct ExchangeEvent {
  double t = 0.0;
  int i = 0;
  int j = 0;
};

enum class ForceMethod { Auto, Naive, Convolution };

class FftConvolver;

// Reusable force evaluator; holds FFT plans for the convolution path.
class ForceEngine {
 public:
  ForceEngine(const KacKernel& kernel, const PotentialSpec& potentials, int N, int d,
              ForceMethod method = ForceMethod::Auto);
  ~ForceEngine();
  ForceEngine(const ForceEngine&) = delete;
  ForceEngine& operator=(const ForceEngine&) = delete;

  ForceMethod method() const { return method_; }
  void compute(const double* X, double* F);

 private:
  void naive(const double* X, double* F) const;
  void windowed(const double* X, double* F) const;

  const KacKernel& kernel_;
  const PotentialSpec& pot_;
  int N_, d_;
  ForceMethod method_;
  std::vector<double> wrapped_;  // phi folded onto Z_N
  std::unique_ptr<FftConvolver> fft_;
  std::vector<double> col_in_, col_out_;
};

std::vector<double> compute_forces(const ChainState& state, const KacKernel& kernel,
                                   const PotentialSpec& potentials,
                                   ForceMethod method = ForceMethod::Auto);

// Velocity-Verlet over ceil(duration/dt_max) equal steps. F must hold the
// forces at the current X on entry and holds them at the final X on exit.
void hamiltonian_flow(ChainState& state, double duration, double dt_max, ForceEngine& engine,
                      std::vector<double>& F);
ChainState hamiltonian_flow(const ChainState& state, double duration, double dt_max,
                            const KacKernel& kernel, const PotentialSpec& potentials);

// Waiting times and (i, j) pairs for the exchange process: total rate
// Lambda = gamma_bar * N * sum_{k>=1} gamma_k, lag k > 0 drawn prop. to gamma_k
// and j = i + k mod N (the pair {i, i-k} is the same event as {i-k, i}).
class ExchangeSampler {
 public:
  ExchangeSampler(const KacKernel& kernel, double gamma_bar);
  double rate() const { return rate_; }
  // Returns +inf when the rate vanishes.
  double wait(RandomStream& rng) const;
  ExchangeEvent pair(RandomStream& rng) const;

 private:
  int N_;
  double rate_;
  std::vector<double> cdf_;  // cumulative gamma_k over k = 1..L, normalized
};

struct NextExchange {
  double wait;
  ExchangeEvent event;
};
NextExchange next_exchange(const KacKernel& kernel, const ModelParams& params, RandomStream& rng);

void apply_exchange(ChainState& state, const ExchangeEvent& event);

// E^i = 1/2|V^i|^2 + U(X^i) + 1/2 sum_k phi_k W(X^i - X^{i+k}).
std::vector<double> site_energies(const ChainState& state, const KacKernel& kernel,
                                  const PotentialSpec& potentials);
double hamiltonian(const ChainState& state, const KacKernel& kernel,
                   const PotentialSpec& potentials);

EmpiricalMeasure empirical_measure(const ChainState& state);

using ChainObserver = std::function<void(const ChainState&)>;

struct ChainRunOptions {
  ForceMethod method = ForceMethod::Auto;
  std::vector<double> sample_times;  // observers fire here (sorted, within [0, horizon])
  bool track_energy = true;          // H evaluated at every sample time
  bool record_events = false;
  std::uint64_t max_events = 0;      // 0: no budget
};

struct ChainRunResult {
  ChainState final_state;
  std::uint64_t events = 0;
  double H0 = 0.0;
  // max over sample times of |H(t) - H(0)| / |H(0)|
  double energy_drift = 0.0;
  std::vector<double> sample_energy;
  std::vector<ExchangeEvent> event_log;
};

ChainRunResult simulate_chain(const ModelParams& params, const KacKernel& kernel,
                              const PotentialSpec& potentials, ChainState state, double horizon,
                              const ChainRunOptions& options, RandomStream& rng,
                              const std::vector<ChainObserver>& observers = {});

}  // namespace kac
