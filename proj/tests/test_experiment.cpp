#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "kacchain/error.hpp"
#include "kacchain/experiment.hpp"

using namespace kac;

TEST_CASE("identical deterministic systems stay at distance zero") {
  ConvergenceParams p;
  p.Ns = {4};
  p.ell = 0.75;
  p.gamma_bar = 0.0;
  p.eps = 0.5;
  p.reference_M = 4;
  p.shared_initial = true;
  p.T = {1.0, 0.0, 1};
  p.times = {0.0, 0.5, 1.0, 2.0};
  p.dt_max = 1e-3;
  const auto r = convergence_experiment(p);
  REQUIRE(r.points.size() == 4);
  for (const auto& pt : r.points) {
    CHECK(pt.boxes == 2);
    for (double s : pt.sliced) CHECK(s <= 1e-10);
  }
}

TEST_CASE("shared initial sampling gives an O(eps) distance at t = 0") {
  ConvergenceParams p;
  p.Ns = {4096};
  p.shared_initial = true;
  p.times = {0.0};
  const auto r = convergence_experiment(p);
  const auto& pt = r.at(4096, 0.0);
  CHECK(pt.boxes == 32);
  CHECK(pt.sliced_mean <= 5.0 * pt.eps);
}

TEST_CASE("convergence experiment is deterministic and worker-independent") {
  ConvergenceParams p;
  p.Ns = {64, 128};
  p.ell = 0.2;
  p.times = {0.0, 0.5};
  p.reference_M = 2560;
  p.cloud_grid = 256;
  const auto a = convergence_experiment(p);
  p.workers = 3;
  const auto b = convergence_experiment(p);
  REQUIRE(a.points.size() == 4);
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    CHECK(a.points[k].sliced == b.points[k].sliced);
    CHECK(a.points[k].bound == b.points[k].bound);
    for (std::size_t q = 0; q < a.points[k].sliced.size(); ++q) {
      CHECK(a.points[k].bound[q] >= a.points[k].sliced[q]);
    }
  }
  CHECK(a.reference_self_distance == b.reference_self_distance);
  CHECK(a.reference_M % 16 == 0);
  REQUIRE(a.ratios.size() == 2);
  CHECK(a.ratios[0].size() == 1);

  ConvergenceParams bad = p;
  bad.replicas = 4;
  CHECK_THROWS_AS(convergence_experiment(bad), InvalidArgument);
  bad = p;
  bad.reference_M = 1000;
  CHECK_THROWS_AS(convergence_experiment(bad), InvalidArgument);
  bad = p;
  bad.max_events = 100;
  CHECK_THROWS_AS(convergence_experiment(bad), BudgetExceeded);
}

TEST_CASE("cloud copies of a chain and half-cloud distance") {
  InitialCondition ic;
  RandomStream rng(11);
  const ChainState s = sample_chain(ic, 256, rng);
  const auto c = cloud_from_chain(s, 2, 64);
  CHECK(c.M == 512);
  for (int m = 0; m < c.M; ++m) {
    CHECK(c.rho[m] > 0.0);
    CHECK(c.rho[m] <= 1.0);
    if (m > 0) CHECK(c.rho[m] > c.rho[m - 1]);
    CHECK(c.x[m] == s.X[m / 2]);
  }
  // Alternating halves pair each site with its own copy, shifted by 1/(2N) in rho.
  const double dist = half_cloud_distance(c, 16);
  CHECK(dist <= 0.5 / 256 + 1e-12);
  CHECK(dist >= 0.0);
}

TEST_CASE("coupling suite satisfies the cost identity and pushforward") {
  CouplingSuiteParams p;
  p.instances = 50;
  for (int d : {1, 2}) {
    p.d = d;
    const auto out = coupling_suite(p);
    REQUIRE(out.size() == 50u);
    for (const auto& inst : out) {
      CHECK(inst.cost_error <= 1e-10);
      CHECK(inst.pushforward_error <= 1e-12);
      CHECK(inst.plan_cost >= 0.0);
    }
  }
}

TEST_CASE("measure files round-trip and self metrics vanish") {
  InitialCondition ic;
  ic.d = 2;
  RandomStream rng(12);
  const ChainState s = sample_chain(ic, 64, rng);
  const EmpiricalMeasure m = empirical_measure(s);
  const auto path = (std::filesystem::temp_directory_path() / "kac_measure_test.csv").string();
  write_measure_csv(path, m);
  int d = 0;
  const DiscreteMeasure back = read_measure_csv(path, &d);
  CHECK(d == 2);
  REQUIRE(back.size() == 64u);
  const EmpiricalMeasure e = to_empirical(back, 2);
  CHECK(e.r == m.r);
  CHECK(e.x == m.x);
  CHECK(e.v == m.v);
  const auto self = measure_metrics(back, back, 2, 8);
  CHECK(self.w1 == 0.0);
  CHECK(self.w1_method == "matching");
  CHECK(self.sliced == 0.0);
  CHECK(self.has_bound);

  RandomStream rng2(13);
  const DiscreteMeasure other = DiscreteMeasure::from_empirical(empirical_measure(sample_chain(ic, 64, rng2)));
  const auto mm = measure_metrics(back, other, 2, 8);
  CHECK(mm.w1 == doctest::Approx(w1_matching(back, other).cost).epsilon(1e-12));
  CHECK(mm.sliced >= mm.w1 - 1e-12);
  std::remove(path.c_str());

  const auto bad = (std::filesystem::temp_directory_path() / "kac_measure_bad.csv").string();
  std::FILE* f = std::fopen(bad.c_str(), "w");
  std::fputs("r,x_1,weight\n0.5,1,1\n", f);
  std::fclose(f);
  CHECK_THROWS_AS(read_measure_csv(bad), InvalidArgument);
  std::remove(bad.c_str());
}
