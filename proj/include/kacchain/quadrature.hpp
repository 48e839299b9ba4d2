#pragma once

#include <functional>

namespace kac {

struct QuadratureResult {
  double value = 0.0;
  // |last estimate - previous estimate| at termination.
  double step_change = 0.0;
  int levels = 0;
  bool converged = false;
};

// Trapezoid rule under repeated step halving with a Romberg (Richardson)
// tableau; stops when successive diagonal entries differ by less than tol.
QuadratureResult romberg(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-13, int max_levels = 22);

}  // namespace kac
