#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kacchain/experiment.hpp"
#include "kacchain/hydro.hpp"
#include "kacchain/kernel.hpp"
#include "kacchain/meanfield.hpp"
#include "kacchain/model.hpp"
#include "kacchain/potential.hpp"

namespace kac {

// YAML experiment description. Every section and key is optional; unknown
// sections and keys are rejected with their line number.
struct ExperimentConfig {
  struct Model {
    int N = 1024;
    double ell = 0.25;
    double ell_schedule_c = 0.0;  // > 0: ell = c / sqrt(log N)
    double gamma_bar = 1.0;
    int d = 1;
    double dt_max = 0.0;
    double moment_order_b = 1.0;
    std::string eps_N;  // "", "auto", a decimal or a rational p/q
    bool operator==(const Model&) const = default;
  } model;
  struct Kernel {
    std::string phi = "bump";    // bump | uniform
    std::string gamma = "bump";
    double phi_sharpness = 1.0;
    double gamma_sharpness = 1.0;
    std::string gamma_rule = "cell";  // cell | pointwise
    bool operator==(const Kernel&) const = default;
  } kernel;
  struct Potential {
    std::string pair = "harmonic";     // harmonic | soft
    std::string pinning = "harmonic";  // harmonic | homogeneous
    double a = 1.0;
    double b = 0.0;
    double c = 4.0;  // growth constant checked at validation
    bool operator==(const Potential&) const = default;
  } potential;
  struct Initial {
    double T0 = 1.0;
    double amp = 0.0;
    int mode = 1;
    bool operator==(const Initial&) const = default;
  } initial;
  struct Run {
    int replicas = 1;
    int workers = 1;
    double horizon = 1.0;
    std::vector<double> sample_times;  // empty: {0, horizon}
    std::string force = "auto";        // auto | naive | convolution
    bool record_events = false;
    double max_events = 2e9;
    bool operator==(const Run&) const = default;
  } run;
  struct Cloud {
    int M = 100000;
    int grid_G = 1024;
    std::string jump = "exchange";  // exchange | resample
    std::string path = "binned";    // binned | exact
    bool operator==(const Cloud&) const = default;
  } cloud;
  struct Picard {
    double horizon = 0.1;
    double dt = 0.01;
    int iterations = 4;
    int boxes = 10;
    bool operator==(const Picard&) const = default;
  } picard;
  struct Hydro {
    std::string mode = "diffusion";  // diffusion | equipartition
    std::vector<double> times{0.05, 0.1, 0.2};
    int grid_G = 64;
    std::string engine = "chain";  // chain | cloud
    int cloud_M = 0;
    double equipartition_t = 0.1;
    int equipartition_M = 1000000;
    double snapshot_spacing = 0.05;
    bool operator==(const Hydro&) const = default;
  } hydro;
  struct Compare {
    std::vector<int> Ns{256, 1024, 4096};
    std::vector<double> times{1.0};
    int reference_M = 100000;
    int replicas = 8;
    bool shared_initial = false;
    bool operator==(const Compare&) const = default;
  } compare;
  struct Coupling {
    int instances = 50;
    int target_atoms = 8;
    bool operator==(const Coupling&) const = default;
  } coupling;
  struct Metrics {
    std::string a;
    std::string b;
    int boxes = 0;
    bool operator==(const Metrics&) const = default;
  } metrics;

  // Builders. seed is supplied by the caller.
  double resolved_ell() const;
  ModelParams model_params(std::uint64_t seed) const;
  KernelProfile phi_profile() const;
  KernelProfile gamma_profile() const;
  GammaRule rule() const;
  PotentialSpec potentials() const;
  InitialCondition initial_condition() const;
  double eps_for(int N) const;  // 0 when eps_N is unset
  DiffusionParams diffusion_params(std::uint64_t seed) const;
  EquipartitionParams equipartition_params(std::uint64_t seed) const;
  ConvergenceParams convergence_params(std::uint64_t seed) const;
  CouplingSuiteParams coupling_params(std::uint64_t seed) const;
  std::vector<double> sample_times() const;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);
// Emits every field with 17 significant digits; parse_config_text inverts it.
std::string serialize_config(const ExperimentConfig& config);
// Parses "p/q" or a decimal.
double parse_rational(const std::string& text);

}  // namespace kac
