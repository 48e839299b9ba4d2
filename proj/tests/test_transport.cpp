#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "kacchain/error.hpp"
#include "kacchain/transport.hpp"

using namespace kac;

namespace {

DiscreteMeasure random_uniform(int n, int dim, bool torus, RandomStream& rng) {
  std::vector<double> c(n * dim);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < dim; ++j) c[k * dim + j] = (torus && j == 0) ? rng.uniform() : rng.normal();
  }
  return DiscreteMeasure::uniform(dim, c, torus);
}

double brute_force(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const int n = static_cast<int>(a.size());
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  double best = 1e300;
  do {
    double s = 0;
    for (int i = 0; i < n; ++i) s += ground_distance(a.atom(i), b.atom(p[i]), a.dim, a.torus_first);
    best = std::min(best, s / n);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// W1 on the line as the integral of |F_a - F_b|.
double quantile_oracle(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < a.size(); ++k) pts.push_back({a.coords[k], a.weights[k]});
  for (std::size_t k = 0; k < b.size(); ++k) pts.push_back({b.coords[k], -b.weights[k]});
  std::sort(pts.begin(), pts.end());
  double F = 0, total = 0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    F += pts[k].second;
    total += std::abs(F) * (pts[k + 1].first - pts[k].first);
  }
  return total;
}

EmpiricalMeasure random_empirical(int J, int per_box, int d, double spread, RandomStream& rng) {
  EmpiricalMeasure m;
  m.d = d;
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < per_box; ++k) {
      m.r.push_back((j + rng.uniform()) / J);
      for (int c = 0; c < d; ++c) {
        m.x.push_back(spread * rng.normal());
        m.v.push_back(spread * rng.normal());
      }
    }
  }
  return m;
}

}  // namespace

TEST_CASE("matching equals brute force") {
  RandomStream rng(1);
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 6;
    const auto a = random_uniform(n, 3, true, rng), b = random_uniform(n, 3, true, rng);
    CHECK(std::abs(w1_matching(a, b).cost - brute_force(a, b)) <= 1e-10);
  }
}

TEST_CASE("matching trivial cases and metric axioms") {
  RandomStream rng(2);
  const auto a = random_uniform(20, 2, true, rng);
  const auto m = w1_matching(a, a);
  CHECK(m.cost == 0.0);
  const auto single_a = DiscreteMeasure::uniform(2, {0.05, 1.0}, true);
  const auto single_b = DiscreteMeasure::uniform(2, {0.95, 4.0}, true);
  CHECK(w1_matching(single_a, single_b).cost == doctest::Approx(std::sqrt(0.01 + 9.0)));
  for (int t = 0; t < 100; ++t) {
    const auto x = random_uniform(8, 3, true, rng), y = random_uniform(8, 3, true, rng),
               z = random_uniform(8, 3, true, rng);
    const double xy = w1_matching(x, y).cost, yx = w1_matching(y, x).cost;
    CHECK(std::abs(xy - yx) <= 1e-9);
    CHECK(xy <= w1_matching(x, z).cost + w1_matching(z, y).cost + 1e-9);
  }
  const auto big = random_uniform(4097, 1, false, rng);
  CHECK_THROWS_AS(w1_matching(big, big), InvalidArgument);
}

TEST_CASE("network simplex agrees with matching and quantile oracles") {
  RandomStream rng(3);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 30;
    const auto a = random_uniform(n, 3, true, rng), b = random_uniform(n, 3, true, rng);
    const auto g = w1_general(a, b);
    CHECK(std::abs(g.cost - w1_matching(a, b).cost) <= 1e-10);
    double rows = 0;
    for (const auto& e : g.plan.entries) rows += e.mass;
    CHECK(rows == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int t = 0; t < 50; ++t) {
    DiscreteMeasure a, b;
    a.dim = b.dim = 1;
    const int na = 1 + t % 13, nb = 1 + (7 * t) % 17;
    double sa = 0, sb = 0;
    for (int k = 0; k < na; ++k) {
      a.coords.push_back(rng.normal());
      a.weights.push_back(rng.uniform());
      sa += a.weights.back();
    }
    for (int k = 0; k < nb; ++k) {
      b.coords.push_back(2.0 * rng.normal());
      b.weights.push_back(rng.uniform());
      sb += b.weights.back();
    }
    for (double& w : a.weights) w /= sa;
    for (double& w : b.weights) w /= sb;
    CHECK(std::abs(w1_general(a, b).cost - quantile_oracle(a, b)) <= 1e-10);
  }
}

TEST_CASE("unequal uniform counts equal the replicated matching") {
  RandomStream rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_uniform(3, 2, true, rng), b = random_uniform(4, 2, true, rng);
    std::vector<double> ca, cb;
    for (int rep = 0; rep < 4; ++rep) ca.insert(ca.end(), a.coords.begin(), a.coords.end());
    for (int rep = 0; rep < 3; ++rep) cb.insert(cb.end(), b.coords.begin(), b.coords.end());
    const auto ra = DiscreteMeasure::uniform(2, ca, true), rb = DiscreteMeasure::uniform(2, cb, true);
    CHECK(std::abs(w1_general(a, b).cost - w1_matching(ra, rb).cost) <= 1e-10);
  }
}

TEST_CASE("permuted copy has zero cost; mass mismatch rejected") {
  RandomStream rng(5);
  auto a = random_uniform(15, 2, false, rng);
  a.weights = std::vector<double>(15, 0.0);
  for (int k = 0; k < 15; ++k) a.weights[k] = (k + 1) / 120.0;
  DiscreteMeasure b = a;
  std::reverse(b.weights.begin(), b.weights.end());
  for (int k = 0; k < 15; ++k) {
    for (int c = 0; c < 2; ++c) b.coords[k * 2 + c] = a.coords[(14 - k) * 2 + c];
  }
  CHECK(w1_general(a, b).cost <= 1e-12);
  b.weights[0] += 1e-6;
  CHECK_THROWS_AS(w1_general(a, b), InvalidArgument);
}

TEST_CASE("box bound dominates the exact boxwise distance") {
  RandomStream rng(6);
  for (int t = 0; t < 50; ++t) {
    const int J = 1 + t % 4, per = 2 + t % 5;
    const auto m1 = random_empirical(J, per, 1, 1.0, rng);
    const auto m2 = random_empirical(J, per, 1, 1.0 + 0.1 * (t % 3), rng);
    double exact = 0;
    for (int j = 0; j < J; ++j) {
      std::vector<double> ca, cb;
      for (std::size_t k = 0; k < m1.size(); ++k) {
        if (std::min(J - 1, static_cast<int>(std::ceil(m1.r[k] * J) - 1)) != j) continue;
        ca.insert(ca.end(), {m1.r[k], m1.x[k], m1.v[k]});
      }
      for (std::size_t k = 0; k < m2.size(); ++k) {
        if (std::min(J - 1, static_cast<int>(std::ceil(m2.r[k] * J) - 1)) != j) continue;
        cb.insert(cb.end(), {m2.r[k], m2.x[k], m2.v[k]});
      }
      exact += w1_matching(DiscreteMeasure::uniform(3, ca, true), DiscreteMeasure::uniform(3, cb, true)).cost / J;
    }
    CHECK(std::abs(boxwise_w1(m1, m2, J) - exact) <= 1e-10);
    const double M = 1.0 + (t % 3), n = 1 + t % 4;
    CHECK(w1_box_bound(m1, m2, 1.0 / J, M, static_cast<int>(n)) >= exact);
  }
}

TEST_CASE("box bound on identical measures") {
  RandomStream rng(7);
  const auto m = random_empirical(4, 10, 1, 1.0, rng);
  for (int n : {1, 2, 4, 8}) {
    const auto t = w1_box_bound_terms(m, m, 4, 2.0, n);
    CHECK(t.cell_term == 0.0);
    CHECK(t.total() == doctest::Approx(2.0 * 2.0 / n + 2.0 / 4 + t.tail_term));
  }
  const auto s = box_bound_schedule(4096, 1.0 / 32, 1);
  CHECK(s.M == doctest::Approx(std::pow(128.0, 1.0 / 8.0)));
  CHECK(s.n == static_cast<int>(std::floor(s.M * s.M)));
}

TEST_CASE("sliced distance dominates plain W1") {
  RandomStream rng(8);
  for (int t = 0; t < 50; ++t) {
    const int J = 1 + t % 5;
    const auto m1 = random_empirical(J, 4, 1, 1.0, rng), m2 = random_empirical(J, 4, 1, 1.2, rng);
    const double full = w1_matching(DiscreteMeasure::from_empirical(m1), DiscreteMeasure::from_empirical(m2)).cost;
    const double sliced = sliced_w1(m1, m2, BoxPartition::with_boxes(4 * J, J));
    CHECK(sliced >= full - 1e-12);
    if (J == 1) CHECK(std::abs(sliced - full) <= 1e-12);
  }
  const auto m = random_empirical(3, 5, 2, 1.0, rng);
  CHECK(sliced_w1(m, m, BoxPartition::with_boxes(15, 3)) == 0.0);
  const auto other = random_empirical(3, 4, 2, 1.0, rng);
  CHECK_NOTHROW(sliced_w1(random_empirical(3, 8, 2, 1.0, rng), other, BoxPartition::with_boxes(12, 3)));
  auto skew = other;
  skew.r[0] = 0.9;
  CHECK_THROWS_AS(sliced_w1(m, skew, BoxPartition::with_boxes(15, 3)), InvalidArgument);
}

TEST_CASE("path sliced distance uses the sup metric") {
  PathMeasure a, b;
  a.d = b.d = 1;
  a.r = b.r = {0.5};
  a.x = {{0.0}, {0.0}};
  a.v = {{0.0}, {0.0}};
  b.x = {{0.0}, {3.0}};
  b.v = {{4.0}, {0.0}};
  CHECK(sliced_w1_paths(a, b, 1) == doctest::Approx(4.0));
}

TEST_CASE("coupling map: identity, cost identity and pushforward") {
  RandomStream rng(9);
  const std::vector<double> w{0.1, 0.4, 0.3, 0.2};
  std::vector<std::vector<double>> vel{{1.0}, {-0.5}, {2.0}, {0.3}};
  std::vector<double> coords{1.0, -0.5, 2.0, 0.3};
  DiscreteMeasure self;
  self.dim = 1;
  self.coords = coords;
  self.weights = w;
  const PiMap id(50, w, vel, self);
  CHECK(id.plan_cost() <= 1e-14);
  for (int k = 0; k < 4; ++k) CHECK(id.evaluate(k, 0.5 / 50) == k);
  for (int t = 0; t < 50; ++t) {
    const int lags = 2 + t % 7, atoms = 1 + t % 5, d = 1 + t % 3;
    std::vector<double> g(lags);
    double s = 0;
    for (double& x : g) s += (x = rng.uniform());
    for (double& x : g) x /= s;
    std::vector<std::vector<double>> v(lags, std::vector<double>(d));
    for (auto& row : v)
      for (double& x : row) x = rng.normal();
    DiscreteMeasure target;
    target.dim = d;
    double ts = 0;
    for (int a = 0; a < atoms; ++a) {
      for (int c = 0; c < d; ++c) target.coords.push_back(rng.normal());
      target.weights.push_back(rng.uniform());
      ts += target.weights.back();
    }
    for (double& x : target.weights) x /= ts;
    const PiMap pm = build_pi_map(100, g, v, target);
    CHECK(std::abs(pm.interval_cost() - pm.plan_cost()) <= 1e-10);
    const auto push = pm.pushforward();
    for (int a = 0; a < atoms; ++a) CHECK(std::abs(push[a] - target.weights[a]) <= 1e-12);
  }
}
