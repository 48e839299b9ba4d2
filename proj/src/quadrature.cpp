#include "kacchain/quadrature.hpp"

#include <cmath>
#include <vector>

namespace kac {

QuadratureResult romberg(const std::function<double(double)>& f, double a, double b, double tol,
                         int max_levels) {
  QuadratureResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::vector<double> prev, cur;
  double h = b - a;
  double trap = 0.5 * h * (f(a) + f(b));
  prev.push_back(trap);
  long intervals = 1;
  for (int level = 1; level <= max_levels; ++level) {
    double sum = 0.0;
    for (long i = 0; i < intervals; ++i) sum += f(a + (i + 0.5) * h);
    trap = 0.5 * trap + 0.5 * h * sum;
    h *= 0.5;
    intervals *= 2;
    cur.assign(level + 1, 0.0);
    cur[0] = trap;
    double factor = 1.0;
    for (int k = 1; k <= level; ++k) {
      factor *= 4.0;
      cur[k] = cur[k - 1] + (cur[k - 1] - prev[k - 1]) / (factor - 1.0);
    }
    const double change = std::abs(cur[level] - prev[level - 1]);
    out.value = cur[level];
    out.step_change = change;
    out.levels = level;
    if (level >= 4 && change <= tol * std::max(1.0, std::abs(cur[level]))) {
      out.converged = true;
      return out;
    }
    prev.swap(cur);
  }
  return out;
}

}  // namespace kac
