#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "kacchain/chain.hpp"
#include "kacchain/config.hpp"
#include "kacchain/error.hpp"
#include "kacchain/experiment.hpp"
#include "kacchain/hydro.hpp"
#include "kacchain/meanfield.hpp"
#include "kacchain/parallel.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace kac;

namespace {

constexpr std::uint64_t kInitialTag = 0x1c;
constexpr std::uint64_t kDynamicsTag = 0xd1;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Context {
  std::string sub;
  ExperimentConfig cfg;
  std::uint64_t seed = 1;
  fs::path dir;
  bool plot = false;
  std::vector<std::string> measures;
  int boxes = -1;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw InvalidArgument("cannot write " + p.string());
  return os;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

void write_plot(const Context& ctx, const std::string& body) {
  if (ctx.plot) open_out(ctx.dir / "plot.gp") << "set datafile separator ','\nset key autotitle columnhead\n" << body;
}

std::string coord_header(int d) {
  std::string h;
  for (int c = 1; c <= d; ++c) h += ",x_" + std::to_string(c);
  for (int c = 1; c <= d; ++c) h += ",v_" + std::to_string(c);
  return h;
}

ForceMethod force_method(const std::string& s) {
  if (s == "naive") return ForceMethod::Naive;
  if (s == "convolution") return ForceMethod::Convolution;
  return ForceMethod::Auto;
}

json run_chain(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const ModelParams mp = cfg.model_params(ctx.seed);
  mp.validate();
  const KacKernel kernel(cfg.phi_profile(), cfg.gamma_profile(), mp.ell, mp.N, cfg.rule());
  const PotentialSpec pot = cfg.potentials();
  const InitialCondition ic = cfg.initial_condition();
  const std::vector<double> times = cfg.sample_times();
  const double horizon = cfg.run.horizon;
  const int R = cfg.run.replicas;
  const double expected = mp.gamma_bar * mp.N * kernel.gamma_positive_sum() * horizon * R;
  if (expected > cfg.run.max_events) {
    throw BudgetExceeded("chain run needs about " + std::to_string(expected) +
                         " exchange events, above the budget of " + num(cfg.run.max_events));
  }

  std::vector<ChainRunResult> results(R);
  std::string trace;
  parallel_for(R, cfg.run.workers, [&](std::size_t r) {
    const RandomStream base = RandomStream::for_replica(ctx.seed, r);
    RandomStream ic_rng = base.split(kInitialTag);
    RandomStream dyn_rng = base.split(kDynamicsTag);
    ChainState s0 = sample_chain(ic, mp.N, ic_rng);
    ChainRunOptions opt;
    opt.method = force_method(cfg.run.force);
    opt.sample_times = times;
    opt.record_events = cfg.run.record_events && r == 0;
    opt.max_events = static_cast<std::uint64_t>(cfg.run.max_events);
    std::vector<ChainObserver> obs;
    if (r == 0) {
      obs.push_back([&](const ChainState& st) {
        const auto e = site_energies(st, kernel, pot);
        for (int s = 0; s < st.N; ++s) {
          trace += num(st.t) + ',' + std::to_string(s + 1);
          for (int c = 0; c < st.d; ++c) trace += ',' + num(st.X[static_cast<std::size_t>(s) * st.d + c]);
          for (int c = 0; c < st.d; ++c) trace += ',' + num(st.V[static_cast<std::size_t>(s) * st.d + c]);
          trace += ',' + num(e[s]) + '\n';
        }
      });
    }
    results[r] = simulate_chain(mp, kernel, pot, std::move(s0), horizon, opt, dyn_rng, obs);
  });

  open_out(ctx.dir / "chain_trace.csv") << "t,site" << coord_header(mp.d) << ",energy\n" << trace;
  if (cfg.run.record_events) {
    auto os = open_out(ctx.dir / "events.csv");
    os << "t,i,j\n";
    for (const auto& ev : results[0].event_log) {
      os << num(ev.t) << ',' << ev.i + 1 << ',' << ev.j + 1 << '\n';
    }
  }
  write_measure_csv((ctx.dir / "measure.csv").string(), empirical_measure(results[0].final_state));

  json reps = json::array();
  double worst = 0.0;
  std::uint64_t events = 0;
  for (int r = 0; r < R; ++r) {
    reps.push_back({{"replica", r},
                    {"events", results[r].events},
                    {"H0", results[r].H0},
                    {"energy_drift", results[r].energy_drift}});
    worst = std::max(worst, results[r].energy_drift);
    events += results[r].events;
  }
  write_plot(ctx, "set xlabel 'site'\nset ylabel 'energy'\nplot 'chain_trace.csv' using 2:" +
                      std::to_string(3 + 2 * mp.d) + " with dots\n");
  return {{"N", mp.N},
          {"ell", mp.ell},
          {"gamma_bar", mp.gamma_bar},
          {"horizon", horizon},
          {"events", events},
          {"energy_drift", worst},
          {"replicas", reps}};
}

CloudEvolveOptions cloud_options(const ExperimentConfig& cfg) {
  CloudEvolveOptions opt;
  opt.dt_max = cfg.model_params(0).step_cap();
  opt.mode = cfg.cloud.jump == "resample" ? JumpMode::Resample : JumpMode::Exchange;
  opt.path = cfg.cloud.path == "exact" ? ForcePath::Exact : ForcePath::Binned;
  opt.max_events = static_cast<std::uint64_t>(cfg.run.max_events);
  return opt;
}

json run_meanfield(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double ell = cfg.resolved_ell();
  const CloudKernel kernel(cfg.phi_profile(), cfg.gamma_profile(), ell);
  const PotentialSpec pot = cfg.potentials();
  const RandomStream base(ctx.seed);
  RandomStream ic_rng = base.split(kInitialTag);
  MeanFieldCloud c0 = init_cloud(cfg.initial_condition(), cfg.cloud.M, cfg.cloud.grid_G, ic_rng);
  CloudEvolveOptions opt = cloud_options(cfg);
  opt.snapshot_times = cfg.sample_times();
  RandomStream dyn_rng = base.split(kDynamicsTag);
  const auto traj = evolve_cloud(std::move(c0), kernel, pot, cfg.model.gamma_bar, cfg.run.horizon,
                                 opt, dyn_rng);
  auto os = open_out(ctx.dir / "cloud_snapshots.csv");
  os << "t,sample_id,rho" << coord_header(cfg.model.d) << '\n';
  json snaps = json::array();
  for (const auto& s : traj.snapshots) {
    for (int m = 0; m < s.M; ++m) {
      os << num(s.t) << ',' << m << ',' << num(s.rho[m]);
      for (int c = 0; c < s.d; ++c) os << ',' << num(s.x[static_cast<std::size_t>(m) * s.d + c]);
      for (int c = 0; c < s.d; ++c) os << ',' << num(s.v[static_cast<std::size_t>(m) * s.d + c]);
      os << '\n';
    }
    snaps.push_back({{"t", s.t}, {"kinetic_per_sample", s.kinetic_sum() / s.M}});
  }
  write_measure_csv((ctx.dir / "measure.csv").string(), traj.final_cloud.as_measure());
  write_plot(ctx, "set xlabel 'rho'\nset ylabel 'v_1'\nplot 'cloud_snapshots.csv' using 3:" +
                      std::to_string(4 + cfg.model.d) + " with dots\n");
  return {{"M", cfg.cloud.M},
          {"ell", ell},
          {"horizon", cfg.run.horizon},
          {"events", traj.events},
          {"empty_windows", traj.empty_windows},
          {"snapshots", snaps}};
}

json run_picard(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double ell = cfg.resolved_ell();
  const CloudKernel kernel(cfg.phi_profile(), cfg.gamma_profile(), ell);
  RandomStream ic_rng = RandomStream(ctx.seed).split(kInitialTag);
  const MeanFieldCloud c0 = init_cloud(cfg.initial_condition(), cfg.cloud.M, cfg.cloud.grid_G, ic_rng);
  const auto rep = picard_iterate(c0, kernel, cfg.potentials(), cfg.model.gamma_bar,
                                  cfg.picard.horizon, cfg.picard.dt, cfg.picard.iterations,
                                  cfg.picard.boxes, ctx.seed,
                                  cfg.cloud.path == "exact" ? ForcePath::Exact : ForcePath::Binned);
  const json out{{"M", cfg.cloud.M},
                 {"ell", ell},
                 {"horizon", cfg.picard.horizon},
                 {"iterations", cfg.picard.iterations},
                 {"distances", rep.distances},
                 {"ratios", rep.ratios}};
  write_json(ctx.dir / "picard_report.json", out);
  return out;
}

json run_hydro(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.hydro.mode == "equipartition") {
    const auto rep = equipartition_experiment(cfg.equipartition_params(ctx.seed));
    const json out{{"mode", "equipartition"},
                   {"M", cfg.hydro.equipartition_M},
                   {"ell", cfg.resolved_ell()},
                   {"t_scaled", cfg.hydro.equipartition_t},
                   {"equipartition_residual", rep.equipartition.value},
                   {"equipartition_se", rep.equipartition.se},
                   {"hamiltonian_current_residual", rep.hamiltonian_current.value},
                   {"hamiltonian_current_se", rep.hamiltonian_current.se},
                   {"events", rep.events}};
    write_json(ctx.dir / "hydro_report.json", out);
    return out;
  }
  const auto rep = diffusion_experiment(cfg.diffusion_params(ctx.seed));
  auto os = open_out(ctx.dir / "profile.csv");
  os << "t_scaled,bin,r_center,energy_mean,energy_se\n";
  json times = json::array();
  for (const auto& t : rep.times) {
    for (std::size_t g = 0; g < t.profile.size(); ++g) {
      os << num(t.t) << ',' << g << ',' << num(rep.centers[g]) << ',' << num(t.profile[g]) << ','
         << num(t.profile_se[g]) << '\n';
    }
    json tested = json::array();
    for (std::size_t k = 0; k < t.tested_names.size(); ++k) {
      tested.push_back({{"g", t.tested_names[k]},
                        {"measured", t.tested_measured[k]},
                        {"se", t.tested_se[k]},
                        {"reference", t.tested_reference[k]}});
    }
    times.push_back({{"t_scaled", t.t},
                     {"l1_error", t.l1_error},
                     {"mode_amplitude", t.mode_amplitude},
                     {"mode_amplitude_se", t.mode_amplitude_se},
                     {"reference_amplitude", t.reference_amplitude},
                     {"tested", tested}});
  }
  const json out{{"mode", "diffusion"},
                 {"N", cfg.model.N},
                 {"ell", cfg.resolved_ell()},
                 {"c_gamma", rep.c_gamma},
                 {"D", rep.D},
                 {"expected_rate", rep.expected_rate},
                 {"fitted_rate", std::isfinite(rep.fitted_rate) ? json(rep.fitted_rate) : json(nullptr)},
                 {"fit_points", rep.fit_points},
                 {"energy_drift", rep.energy_drift},
                 {"events", rep.events},
                 {"times", times}};
  write_json(ctx.dir / "hydro_report.json", out);
  write_plot(ctx, "set xlabel 'r'\nset ylabel 'energy'\nplot 'profile.csv' using 3:4:1 with points palette\n");
  return out;
}

json run_compare(const Context& ctx) {
  const auto rep = convergence_experiment(ctx.cfg.convergence_params(ctx.seed));
  auto os = open_out(ctx.dir / "compare.csv");
  os << "N,boxes,eps,t,sliced_mean,sliced_se,bound_mean,bound_se\n";
  json pts = json::array();
  for (const auto& p : rep.points) {
    os << p.N << ',' << p.boxes << ',' << num(p.eps) << ',' << num(p.t) << ',' << num(p.sliced_mean)
       << ',' << num(p.sliced_se) << ',' << num(p.bound_mean) << ',' << num(p.bound_se) << '\n';
    pts.push_back({{"N", p.N},
                   {"boxes", p.boxes},
                   {"eps", p.eps},
                   {"t", p.t},
                   {"sliced", p.sliced},
                   {"sliced_mean", p.sliced_mean},
                   {"sliced_se", p.sliced_se},
                   {"bound_mean", p.bound_mean},
                   {"bound_se", p.bound_se}});
  }
  const json out{{"reference", rep.reference},
                 {"reference_M", rep.reference_M},
                 {"reference_self_distance", rep.reference_self_distance},
                 {"ratios", rep.ratios},
                 {"non_increasing_2se", rep.non_increasing(2.0)},
                 {"events", rep.events},
                 {"points", pts}};
  write_json(ctx.dir / "compare_report.json", out);
  write_plot(ctx, "set logscale xy\nset xlabel 'N'\nset ylabel 'sliced W1'\n"
                  "plot 'compare.csv' using 1:5:6 with yerrorlines\n");
  return out;
}

json run_coupling(const Context& ctx) {
  const auto inst = coupling_suite(ctx.cfg.coupling_params(ctx.seed));
  auto os = open_out(ctx.dir / "coupling.csv");
  os << "instance,site,plan_cost,interval_cost,cost_error,pushforward_error\n";
  double worst_cost = 0.0, worst_push = 0.0;
  for (std::size_t k = 0; k < inst.size(); ++k) {
    const auto& c = inst[k];
    os << k << ',' << c.site + 1 << ',' << num(c.plan_cost) << ',' << num(c.interval_cost) << ','
       << num(c.cost_error) << ',' << num(c.pushforward_error) << '\n';
    worst_cost = std::max(worst_cost, c.cost_error);
    worst_push = std::max(worst_push, c.pushforward_error);
  }
  const json out{{"instances", inst.size()},
                 {"max_cost_error", worst_cost},
                 {"max_pushforward_error", worst_push}};
  write_json(ctx.dir / "coupling_report.json", out);
  return out;
}

json run_metrics(const Context& ctx) {
  std::string a = ctx.cfg.metrics.a, b = ctx.cfg.metrics.b;
  if (!ctx.measures.empty()) {
    if (ctx.measures.size() != 2) throw InvalidArgument("metrics needs exactly two --measure files");
    a = ctx.measures[0];
    b = ctx.measures[1];
  }
  if (a.empty() || b.empty()) throw InvalidArgument("metrics needs two measure files");
  int da = 0, db = 0;
  const DiscreteMeasure ma = read_measure_csv(a, &da), mb = read_measure_csv(b, &db);
  if (da != db) throw InvalidArgument("measure files have different dimensions");
  const int boxes = ctx.boxes >= 0 ? ctx.boxes : ctx.cfg.metrics.boxes;
  const auto rep = measure_metrics(ma, mb, da, boxes);
  json out{{"a", a}, {"b", b}, {"atoms_a", ma.size()}, {"atoms_b", mb.size()}, {"d", da}};
  if (rep.has_w1) {
    out["w1"] = rep.w1;
    out["w1_method"] = rep.w1_method;
  }
  if (rep.has_sliced) {
    out["boxes"] = boxes;
    out["sliced_w1"] = rep.sliced;
  }
  if (rep.has_bound) out["w1_box_bound"] = rep.bound;
  write_json(ctx.dir / "metrics.json", out);
  return out;
}

void emit_error(const std::string& kind, const std::string& message, int line = 0,
                const std::string& field = "") {
  json j{{"error", kind}, {"message", message}};
  if (line > 0) j["line"] = line;
  if (!field.empty()) j["field"] = field;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kac-chain simulator: chain, mean-field cloud, transport and hydrodynamic experiments"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out";
  std::uint64_t seed = 1;
  int workers = -1;
  bool plot = false;
  std::vector<std::string> measures;
  int boxes = -1;
  const std::vector<std::pair<std::string, std::string>> subs{
      {"chain", "simulate the microscopic chain"},
      {"meanfield", "evolve a mean-field cloud"},
      {"picard", "Picard iteration on a cloud"},
      {"hydro", "diffusive-scale energy profile or equipartition run"},
      {"compare", "chain versus mean-field convergence experiment"},
      {"coupling", "lattice coupling-map suite"},
      {"metrics", "distances between two measure files"}};
  for (const auto& [name, help] : subs) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", config_path, "YAML config file");
    s->add_option("--seed", seed, "master seed");
    s->add_option("--workers", workers, "worker threads (0: all cores)");
    s->add_option("--out", out_dir, "output root directory");
    s->add_flag("--emit-plot", plot, "write a gnuplot script next to the CSVs");
    if (name == "metrics") {
      s->add_option("--measure", measures, "measure CSV (give twice)");
      s->add_option("--boxes", boxes, "box count for sliced distances (0: none)");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    emit_error("usage", e.what());
    return 2;
  }

  Context ctx;
  ctx.sub = app.get_subcommands().front()->get_name();
  ctx.seed = seed;
  ctx.plot = plot;
  ctx.measures = measures;
  ctx.boxes = boxes;
  try {
    set_warnings_enabled(true);
    ctx.cfg = config_path.empty() ? parse_config_text("") : parse_config(config_path);
    if (workers >= 0) ctx.cfg.run.workers = workers;
    ExperimentConfig keyed = ctx.cfg;
    keyed.run.workers = 1;
    std::string key = ctx.sub + '\n' + serialize_config(keyed) + "seed=" + std::to_string(seed);
    for (const auto& m : measures) key += "\nmeasure=" + m;
    key += "\nboxes=" + std::to_string(boxes);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(key)));
    ctx.dir = fs::path(out_dir) / (ctx.sub + "-" + hex);
    fs::create_directories(ctx.dir);
    open_out(ctx.dir / "config.yaml") << serialize_config(ctx.cfg);

    json summary;
    if (ctx.sub == "chain") summary = run_chain(ctx);
    else if (ctx.sub == "meanfield") summary = run_meanfield(ctx);
    else if (ctx.sub == "picard") summary = run_picard(ctx);
    else if (ctx.sub == "hydro") summary = run_hydro(ctx);
    else if (ctx.sub == "compare") summary = run_compare(ctx);
    else if (ctx.sub == "coupling") summary = run_coupling(ctx);
    else summary = run_metrics(ctx);

    json head{{"subcommand", ctx.sub}, {"seed", seed}, {"output", ctx.dir.string()}};
    head.update(summary);
    write_json(ctx.dir / "summary.json", head);
    std::cout << head.dump() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    emit_error(e.kind(), e.what(), e.line(), e.field());
  } catch (const Error& e) {
    emit_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    emit_error("internal", e.what());
  }
  return 1;
}
