#include "kacchain/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "kacchain/error.hpp"
#include "kacchain/rng.hpp"

namespace kac {

double parse_rational(const std::string& text) {
  const auto parse_num = [&](const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw InvalidArgument("not a number: '" + text + "'");
    }
    if (pos != s.size()) throw InvalidArgument("not a number: '" + text + "'");
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_num(text);
  const double num = parse_num(text.substr(0, slash));
  const double den = parse_num(text.substr(slash + 1));
  if (den == 0.0) throw InvalidArgument("zero denominator in '" + text + "'");
  return num / den;
}

namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

class Reader {
 public:
  std::map<std::string, int> lines;

  int line(const std::string& field) const {
    const auto it = lines.find(field);
    return it == lines.end() ? 0 : it->second;
  }

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    const int l = line(field);
    throw ConfigError(l, field, (l > 0 ? "line " + std::to_string(l) + ": " : "") + field + ": " + msg);
  }

  template <class T>
  T scalar(const YAML::Node& n, const std::string& field, const char* what) const {
    if (!n.IsScalar()) fail(field, std::string("expected ") + what);
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(field, std::string("expected ") + what + ", got '" + n.Scalar() + "'");
    }
  }

  double real(const YAML::Node& n, const std::string& field) const {
    if (!n.IsScalar()) fail(field, "expected a number");
    try {
      return parse_rational(n.Scalar());
    } catch (const InvalidArgument& e) {
      fail(field, e.what());
    }
  }

  int integer(const YAML::Node& n, const std::string& field) const {
    const double v = real(n, field);
    if (v != std::floor(v) || std::abs(v) > 2147483647.0) fail(field, "expected an integer");
    return static_cast<int>(v);
  }

  std::vector<double> reals(const YAML::Node& n, const std::string& field) const {
    if (n.IsScalar()) return {real(n, field)};
    if (!n.IsSequence()) fail(field, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& e : n) out.push_back(real(e, field));
    return out;
  }

  std::vector<int> integers(const YAML::Node& n, const std::string& field) const {
    if (n.IsScalar()) return {integer(n, field)};
    if (!n.IsSequence()) fail(field, "expected a list of integers");
    std::vector<int> out;
    for (const auto& e : n) out.push_back(integer(e, field));
    return out;
  }
};

using Handler = std::function<void(const YAML::Node&, const std::string&)>;

void require_choice(const Reader& rd, const std::string& field, const std::string& value,
                    std::initializer_list<const char*> choices) {
  std::string list;
  for (const char* c : choices) {
    if (value == c) return;
    list += (list.empty() ? "" : ", ") + std::string(c);
  }
  rd.fail(field, "'" + value + "' is not one of " + list);
}

void require_sorted(const Reader& rd, const std::string& field, const std::vector<double>& v,
                    double lo) {
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!(v[k] >= lo) || (k > 0 && !(v[k] > v[k - 1]))) {
      rd.fail(field, "values must be strictly increasing and at least " + std::to_string(lo));
    }
  }
}

void validate(const ExperimentConfig& c, const Reader& rd) {
  const auto& m = c.model;
  if (m.N < 1) rd.fail("model.N", "must be a positive integer");
  if (m.ell_schedule_c < 0.0) rd.fail("model.ell_schedule_c", "must be nonnegative");
  if (m.ell_schedule_c > 0.0 && m.N < 2) rd.fail("model.ell_schedule_c", "needs N >= 2");
  const double ell = c.resolved_ell();
  const std::string ell_field = m.ell_schedule_c > 0.0 ? "model.ell_schedule_c" : "model.ell";
  if (!(ell > 0.0 && ell < 1.0)) rd.fail(ell_field, "ell must lie in (0, 1)");
  if (ell * m.N < 1.0 - 1e-12) rd.fail(ell_field, "ell*N must be at least 1");
  if (!(m.gamma_bar >= 0.0) || !std::isfinite(m.gamma_bar)) {
    rd.fail("model.gamma_bar", "must be a finite nonnegative real");
  }
  if (m.d < 1) rd.fail("model.d", "must be a positive integer");
  if (m.dt_max < 0.0) rd.fail("model.dt_max", "must be nonnegative");
  if (!(m.moment_order_b > 0.0)) rd.fail("model.moment_order_b", "must be positive");
  if (!m.eps_N.empty() && m.eps_N != "auto") {
    double eps = 0.0;
    try {
      eps = parse_rational(m.eps_N);
      validate_eps(eps, m.N, ell);
      if (rd.lines.count("compare.Ns")) {
        for (int N : c.compare.Ns) validate_eps(eps, N, ell);
      }
    } catch (const InvalidArgument& e) {
      rd.fail("model.eps_N", e.what());
    }
  }

  const auto& k = c.kernel;
  require_choice(rd, "kernel.phi", k.phi, {"bump", "uniform"});
  require_choice(rd, "kernel.gamma", k.gamma, {"bump", "uniform"});
  require_choice(rd, "kernel.gamma_rule", k.gamma_rule, {"cell", "pointwise"});
  if (!(k.phi_sharpness > 0.0)) rd.fail("kernel.phi_sharpness", "must be positive");
  if (!(k.gamma_sharpness > 0.0)) rd.fail("kernel.gamma_sharpness", "must be positive");

  const auto& p = c.potential;
  require_choice(rd, "potential.pair", p.pair, {"harmonic", "soft"});
  require_choice(rd, "potential.pinning", p.pinning, {"harmonic", "homogeneous"});
  if (!(p.c > 0.0)) rd.fail("potential.c", "must be positive");
  try {
    const PotentialSpec spec = c.potentials();
    RandomStream rng(0x9a7);
    validate_potentials(spec, m.d, p.c, rng);
  } catch (const InvalidArgument& e) {
    const std::string field = p.pinning == "homogeneous" && m.d == 1 && p.b != 0.0
                                  ? "potential.b"
                                  : "potential.pinning";
    rd.fail(field, e.what());
  }

  const auto& in = c.initial;
  try {
    c.initial_condition().T.validate();
  } catch (const InvalidArgument& e) {
    rd.fail("initial.amp", e.what());
  }
  if (in.mode < 1) rd.fail("initial.mode", "must be a positive integer");

  const auto& r = c.run;
  if (r.replicas < 1) rd.fail("run.replicas", "must be positive");
  if (r.workers < 0) rd.fail("run.workers", "must be nonnegative (0: all cores)");
  if (!(r.horizon >= 0.0)) rd.fail("run.horizon", "must be nonnegative");
  require_sorted(rd, "run.sample_times", r.sample_times, 0.0);
  if (!r.sample_times.empty() && r.sample_times.back() > r.horizon) {
    rd.fail("run.sample_times", "sample times must not exceed the horizon");
  }
  require_choice(rd, "run.force", r.force, {"auto", "naive", "convolution"});
  if (!(r.max_events > 0.0)) rd.fail("run.max_events", "must be positive");

  const auto& cl = c.cloud;
  if (cl.grid_G < 8) rd.fail("cloud.grid_G", "must be at least 8");
  if (cl.M < cl.grid_G) rd.fail("cloud.M", "must be at least grid_G");
  if (cl.M * ell < 100.0) {
    rd.fail("cloud.M", "M*ell = " + std::to_string(cl.M * ell) +
                           " is below 100; jump windows would often be empty");
  }
  require_choice(rd, "cloud.jump", cl.jump, {"exchange", "resample"});
  require_choice(rd, "cloud.path", cl.path, {"binned", "exact"});

  const auto& pc = c.picard;
  if (!(pc.horizon > 0.0)) rd.fail("picard.horizon", "must be positive");
  if (!(pc.dt > 0.0)) rd.fail("picard.dt", "must be positive");
  if (pc.iterations < 2) rd.fail("picard.iterations", "must be at least 2");
  if (pc.boxes < 1) rd.fail("picard.boxes", "must be positive");

  const auto& h = c.hydro;
  require_choice(rd, "hydro.mode", h.mode, {"diffusion", "equipartition"});
  require_choice(rd, "hydro.engine", h.engine, {"chain", "cloud"});
  require_sorted(rd, "hydro.times", h.times, 0.0);
  if (h.times.empty()) rd.fail("hydro.times", "needs at least one time");
  if (h.grid_G < 2) rd.fail("hydro.grid_G", "must be at least 2");
  if (h.cloud_M < 0) rd.fail("hydro.cloud_M", "must be nonnegative");
  if (h.cloud_M > 0 && h.cloud_M * ell < 100.0) rd.fail("hydro.cloud_M", "M*ell must be at least 100");
  if (!(h.equipartition_t > 0.0)) rd.fail("hydro.equipartition_t", "must be positive");
  if (h.equipartition_M * ell < 100.0) rd.fail("hydro.equipartition_M", "M*ell must be at least 100");
  if (!(h.snapshot_spacing > 0.0)) rd.fail("hydro.snapshot_spacing", "must be positive");

  const auto& cp = c.compare;
  if (cp.Ns.empty()) rd.fail("compare.Ns", "needs at least one N");
  for (int N : cp.Ns) {
    if (N < 1) rd.fail("compare.Ns", "every N must be positive");
    if (ell * N < 1.0 - 1e-12) rd.fail("compare.Ns", "ell*N must be at least 1 for every N");
  }
  require_sorted(rd, "compare.times", cp.times, 0.0);
  if (cp.times.empty()) rd.fail("compare.times", "needs at least one time");
  if (cp.reference_M < 1) rd.fail("compare.reference_M", "must be positive");
  if (cp.replicas < 8) rd.fail("compare.replicas", "standard errors need at least 8 replicas");
  const int max_N = *std::max_element(cp.Ns.begin(), cp.Ns.end());
  if (!cp.shared_initial && static_cast<double>(cp.reference_M) < 10.0 * max_N) {
    rd.fail("compare.reference_M", "reference cloud needs M >= 10 * max N");
  }

  if (c.coupling.instances < 1) rd.fail("coupling.instances", "must be positive");
  if (c.coupling.target_atoms < 1) rd.fail("coupling.target_atoms", "must be positive");
  if (c.metrics.boxes < 0) rd.fail("metrics.boxes", "must be nonnegative");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.mark.line + 1, "", "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ExperimentConfig c;
  Reader rd;
  if (root.IsNull()) {
    validate(c, rd);
    return c;
  }
  if (!root.IsMap()) throw ConfigError(line_of(root), "", "config must be a mapping of sections");

  auto& m = c.model;
  auto& k = c.kernel;
  auto& p = c.potential;
  auto& in = c.initial;
  auto& r = c.run;
  auto& cl = c.cloud;
  auto& pc = c.picard;
  auto& h = c.hydro;
  auto& cp = c.compare;
  auto& cu = c.coupling;
  auto& me = c.metrics;
  const auto str = [&](const YAML::Node& n, const std::string& f) {
    return rd.scalar<std::string>(n, f, "a string");
  };
  const auto flag = [&](const YAML::Node& n, const std::string& f) {
    return rd.scalar<bool>(n, f, "true or false");
  };

  const std::map<std::string, std::map<std::string, Handler>> table{
      {"model",
       {{"N", [&](auto& n, auto& f) { m.N = rd.integer(n, f); }},
        {"ell", [&](auto& n, auto& f) { m.ell = rd.real(n, f); }},
        {"ell_schedule_c", [&](auto& n, auto& f) { m.ell_schedule_c = rd.real(n, f); }},
        {"gamma_bar", [&](auto& n, auto& f) { m.gamma_bar = rd.real(n, f); }},
        {"d", [&](auto& n, auto& f) { m.d = rd.integer(n, f); }},
        {"dt_max", [&](auto& n, auto& f) { m.dt_max = rd.real(n, f); }},
        {"moment_order_b", [&](auto& n, auto& f) { m.moment_order_b = rd.real(n, f); }},
        {"eps_N", [&](auto& n, auto& f) { m.eps_N = str(n, f); }}}},
      {"kernel",
       {{"phi", [&](auto& n, auto& f) { k.phi = str(n, f); }},
        {"gamma", [&](auto& n, auto& f) { k.gamma = str(n, f); }},
        {"phi_sharpness", [&](auto& n, auto& f) { k.phi_sharpness = rd.real(n, f); }},
        {"gamma_sharpness", [&](auto& n, auto& f) { k.gamma_sharpness = rd.real(n, f); }},
        {"gamma_rule", [&](auto& n, auto& f) { k.gamma_rule = str(n, f); }}}},
      {"potential",
       {{"pair", [&](auto& n, auto& f) { p.pair = str(n, f); }},
        {"pinning", [&](auto& n, auto& f) { p.pinning = str(n, f); }},
        {"a", [&](auto& n, auto& f) { p.a = rd.real(n, f); }},
        {"b", [&](auto& n, auto& f) { p.b = rd.real(n, f); }},
        {"c", [&](auto& n, auto& f) { p.c = rd.real(n, f); }}}},
      {"initial",
       {{"T0", [&](auto& n, auto& f) { in.T0 = rd.real(n, f); }},
        {"amp", [&](auto& n, auto& f) { in.amp = rd.real(n, f); }},
        {"mode", [&](auto& n, auto& f) { in.mode = rd.integer(n, f); }}}},
      {"run",
       {{"replicas", [&](auto& n, auto& f) { r.replicas = rd.integer(n, f); }},
        {"workers", [&](auto& n, auto& f) { r.workers = rd.integer(n, f); }},
        {"horizon", [&](auto& n, auto& f) { r.horizon = rd.real(n, f); }},
        {"sample_times", [&](auto& n, auto& f) { r.sample_times = rd.reals(n, f); }},
        {"force", [&](auto& n, auto& f) { r.force = str(n, f); }},
        {"record_events", [&](auto& n, auto& f) { r.record_events = flag(n, f); }},
        {"max_events", [&](auto& n, auto& f) { r.max_events = rd.real(n, f); }}}},
      {"cloud",
       {{"M", [&](auto& n, auto& f) { cl.M = rd.integer(n, f); }},
        {"grid_G", [&](auto& n, auto& f) { cl.grid_G = rd.integer(n, f); }},
        {"jump", [&](auto& n, auto& f) { cl.jump = str(n, f); }},
        {"path", [&](auto& n, auto& f) { cl.path = str(n, f); }}}},
      {"picard",
       {{"horizon", [&](auto& n, auto& f) { pc.horizon = rd.real(n, f); }},
        {"dt", [&](auto& n, auto& f) { pc.dt = rd.real(n, f); }},
        {"iterations", [&](auto& n, auto& f) { pc.iterations = rd.integer(n, f); }},
        {"boxes", [&](auto& n, auto& f) { pc.boxes = rd.integer(n, f); }}}},
      {"hydro",
       {{"mode", [&](auto& n, auto& f) { h.mode = str(n, f); }},
        {"times", [&](auto& n, auto& f) { h.times = rd.reals(n, f); }},
        {"grid_G", [&](auto& n, auto& f) { h.grid_G = rd.integer(n, f); }},
        {"engine", [&](auto& n, auto& f) { h.engine = str(n, f); }},
        {"cloud_M", [&](auto& n, auto& f) { h.cloud_M = rd.integer(n, f); }},
        {"equipartition_t", [&](auto& n, auto& f) { h.equipartition_t = rd.real(n, f); }},
        {"equipartition_M", [&](auto& n, auto& f) { h.equipartition_M = rd.integer(n, f); }},
        {"snapshot_spacing", [&](auto& n, auto& f) { h.snapshot_spacing = rd.real(n, f); }}}},
      {"compare",
       {{"Ns", [&](auto& n, auto& f) { cp.Ns = rd.integers(n, f); }},
        {"times", [&](auto& n, auto& f) { cp.times = rd.reals(n, f); }},
        {"reference_M", [&](auto& n, auto& f) { cp.reference_M = rd.integer(n, f); }},
        {"replicas", [&](auto& n, auto& f) { cp.replicas = rd.integer(n, f); }},
        {"shared_initial", [&](auto& n, auto& f) { cp.shared_initial = flag(n, f); }}}},
      {"coupling",
       {{"instances", [&](auto& n, auto& f) { cu.instances = rd.integer(n, f); }},
        {"target_atoms", [&](auto& n, auto& f) { cu.target_atoms = rd.integer(n, f); }}}},
      {"metrics",
       {{"a", [&](auto& n, auto& f) { me.a = str(n, f); }},
        {"b", [&](auto& n, auto& f) { me.b = str(n, f); }},
        {"boxes", [&](auto& n, auto& f) { me.boxes = rd.integer(n, f); }}}},
  };

  for (const auto& sec : root) {
    const std::string name = sec.first.as<std::string>();
    const auto it = table.find(name);
    if (it == table.end()) {
      const int l = line_of(sec.first);
      throw ConfigError(l, name, "line " + std::to_string(l) + ": unknown section '" + name + "'");
    }
    if (sec.second.IsNull()) continue;
    if (!sec.second.IsMap()) {
      const int l = line_of(sec.second);
      throw ConfigError(l, name, "line " + std::to_string(l) + ": section '" + name + "' must be a mapping");
    }
    for (const auto& kv : sec.second) {
      const std::string key = kv.first.as<std::string>();
      const std::string field = name + "." + key;
      rd.lines[field] = line_of(kv.first);
      const auto h2 = it->second.find(key);
      if (h2 == it->second.end()) rd.fail(field, "unknown key");
      h2->second(kv.second, field);
    }
  }
  validate(c, rd);
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(0, "", "cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  const auto section = [&](const char* name, const std::function<void()>& body) {
    e << YAML::Key << name << YAML::Value << YAML::BeginMap;
    body();
    e << YAML::EndMap;
  };
  const auto kv = [&](const char* key, const auto& value) { e << YAML::Key << key << YAML::Value << value; };
  const auto list = [&](const char* key, const auto& values) {
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : values) e << v;
    e << YAML::EndSeq;
  };
  section("model", [&] {
    kv("N", c.model.N);
    kv("ell", c.model.ell);
    kv("ell_schedule_c", c.model.ell_schedule_c);
    kv("gamma_bar", c.model.gamma_bar);
    kv("d", c.model.d);
    kv("dt_max", c.model.dt_max);
    kv("moment_order_b", c.model.moment_order_b);
    e << YAML::Key << "eps_N" << YAML::Value << YAML::DoubleQuoted << c.model.eps_N;
  });
  section("kernel", [&] {
    kv("phi", c.kernel.phi);
    kv("gamma", c.kernel.gamma);
    kv("phi_sharpness", c.kernel.phi_sharpness);
    kv("gamma_sharpness", c.kernel.gamma_sharpness);
    kv("gamma_rule", c.kernel.gamma_rule);
  });
  section("potential", [&] {
    kv("pair", c.potential.pair);
    kv("pinning", c.potential.pinning);
    kv("a", c.potential.a);
    kv("b", c.potential.b);
    kv("c", c.potential.c);
  });
  section("initial", [&] {
    kv("T0", c.initial.T0);
    kv("amp", c.initial.amp);
    kv("mode", c.initial.mode);
  });
  section("run", [&] {
    kv("replicas", c.run.replicas);
    kv("workers", c.run.workers);
    kv("horizon", c.run.horizon);
    list("sample_times", c.run.sample_times);
    kv("force", c.run.force);
    kv("record_events", c.run.record_events);
    kv("max_events", c.run.max_events);
  });
  section("cloud", [&] {
    kv("M", c.cloud.M);
    kv("grid_G", c.cloud.grid_G);
    kv("jump", c.cloud.jump);
    kv("path", c.cloud.path);
  });
  section("picard", [&] {
    kv("horizon", c.picard.horizon);
    kv("dt", c.picard.dt);
    kv("iterations", c.picard.iterations);
    kv("boxes", c.picard.boxes);
  });
  section("hydro", [&] {
    kv("mode", c.hydro.mode);
    list("times", c.hydro.times);
    kv("grid_G", c.hydro.grid_G);
    kv("engine", c.hydro.engine);
    kv("cloud_M", c.hydro.cloud_M);
    kv("equipartition_t", c.hydro.equipartition_t);
    kv("equipartition_M", c.hydro.equipartition_M);
    kv("snapshot_spacing", c.hydro.snapshot_spacing);
  });
  section("compare", [&] {
    list("Ns", c.compare.Ns);
    list("times", c.compare.times);
    kv("reference_M", c.compare.reference_M);
    kv("replicas", c.compare.replicas);
    kv("shared_initial", c.compare.shared_initial);
  });
  section("coupling", [&] {
    kv("instances", c.coupling.instances);
    kv("target_atoms", c.coupling.target_atoms);
  });
  section("metrics", [&] {
    e << YAML::Key << "a" << YAML::Value << YAML::DoubleQuoted << c.metrics.a;
    e << YAML::Key << "b" << YAML::Value << YAML::DoubleQuoted << c.metrics.b;
    kv("boxes", c.metrics.boxes);
  });
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

double ExperimentConfig::resolved_ell() const {
  if (model.ell_schedule_c > 0.0) return model.ell_schedule_c / std::sqrt(std::log(model.N));
  return model.ell;
}

ModelParams ExperimentConfig::model_params(std::uint64_t seed) const {
  ModelParams p;
  p.N = model.N;
  p.ell = resolved_ell();
  p.gamma_bar = model.gamma_bar;
  p.d = model.d;
  p.dt_max = model.dt_max;
  p.moment_order_b = model.moment_order_b;
  p.seed = seed;
  return p;
}

KernelProfile ExperimentConfig::phi_profile() const {
  return kernel.phi == "uniform" ? KernelProfile::uniform_test()
                                 : KernelProfile::smooth_bump(kernel.phi_sharpness);
}

KernelProfile ExperimentConfig::gamma_profile() const {
  return kernel.gamma == "uniform" ? KernelProfile::uniform_test()
                                   : KernelProfile::smooth_bump(kernel.gamma_sharpness);
}

GammaRule ExperimentConfig::rule() const {
  return kernel.gamma_rule == "pointwise" ? GammaRule::Pointwise : GammaRule::CellIntegral;
}

PotentialSpec ExperimentConfig::potentials() const {
  PotentialSpec s = potential.pinning == "homogeneous"
                        ? PotentialSpec::homogeneous(potential.a, potential.b)
                        : PotentialSpec::harmonic(potential.a);
  if (potential.pair == "soft") s.with_soft_pair();
  return s;
}

InitialCondition ExperimentConfig::initial_condition() const {
  InitialCondition ic;
  ic.T = {initial.T0, initial.amp, initial.mode};
  ic.potentials = potentials();
  ic.d = model.d;
  return ic;
}

double ExperimentConfig::eps_for(int N) const {
  if (model.eps_N.empty()) return 0.0;
  if (model.eps_N == "auto") {
    return 1.0 / snap_box_count(convergence_eps(resolved_ell(), N, model.d), N, resolved_ell());
  }
  return parse_rational(model.eps_N);
}

std::vector<double> ExperimentConfig::sample_times() const {
  if (!run.sample_times.empty()) return run.sample_times;
  if (run.horizon == 0.0) return {0.0};
  return {0.0, run.horizon};
}

DiffusionParams ExperimentConfig::diffusion_params(std::uint64_t seed) const {
  DiffusionParams p;
  p.N = model.N;
  p.ell = resolved_ell();
  p.gamma_bar = model.gamma_bar;
  p.d = model.d;
  p.T = {initial.T0, initial.amp, initial.mode};
  p.potentials = potentials();
  p.phi_sharpness = kernel.phi_sharpness;
  p.gamma_sharpness = kernel.gamma_sharpness;
  p.times = hydro.times;
  p.replicas = run.replicas;
  p.workers = run.workers;
  p.grid_G = hydro.grid_G;
  p.dt_max = model.dt_max;
  p.engine = hydro.engine == "cloud" ? DiffusionEngine::Cloud : DiffusionEngine::Chain;
  p.cloud_M = hydro.cloud_M;
  p.cloud_grid = cloud.grid_G;
  p.seed = seed;
  p.max_events = run.max_events;
  return p;
}

EquipartitionParams ExperimentConfig::equipartition_params(std::uint64_t seed) const {
  EquipartitionParams p;
  p.M = hydro.equipartition_M;
  p.ell = resolved_ell();
  p.gamma_bar = model.gamma_bar;
  p.d = model.d;
  p.T = {initial.T0, initial.amp, initial.mode};
  p.potentials = potentials();
  p.t = hydro.equipartition_t;
  p.dt_max = model.dt_max > 0.0 ? model.dt_max : default_dt_max(resolved_ell());
  p.snapshot_spacing = hydro.snapshot_spacing;
  p.grid_G = cloud.grid_G;
  p.seed = seed;
  return p;
}

ConvergenceParams ExperimentConfig::convergence_params(std::uint64_t seed) const {
  ConvergenceParams p;
  p.Ns = compare.Ns;
  p.ell = resolved_ell();
  p.gamma_bar = model.gamma_bar;
  p.d = model.d;
  p.T = {initial.T0, initial.amp, initial.mode};
  p.potentials = potentials();
  p.phi_sharpness = kernel.phi_sharpness;
  p.gamma_sharpness = kernel.gamma_sharpness;
  p.times = compare.times;
  p.replicas = compare.replicas;
  p.workers = run.workers;
  p.reference_M = compare.reference_M;
  p.cloud_grid = cloud.grid_G;
  p.eps = model.eps_N.empty() || model.eps_N == "auto" ? 0.0 : parse_rational(model.eps_N);
  p.shared_initial = compare.shared_initial;
  p.dt_max = model.dt_max;
  p.seed = seed;
  p.max_events = run.max_events;
  return p;
}

CouplingSuiteParams ExperimentConfig::coupling_params(std::uint64_t seed) const {
  CouplingSuiteParams p;
  p.N = model.N;
  p.ell = resolved_ell();
  p.d = model.d;
  p.T = {initial.T0, initial.amp, initial.mode};
  p.instances = coupling.instances;
  p.target_atoms = coupling.target_atoms;
  p.seed = seed;
  return p;
}

}  // namespace kac
