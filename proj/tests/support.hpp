// Test-only oracles. Nothing here calls into the solvers under test.
#ifndef TSE_TESTS_SUPPORT_HPP
#define TSE_TESTS_SUPPORT_HPP

#include "tse/lwr.hpp"

#include <cmath>
#include <optional>

namespace tse::testing {

/// Closed-form entropy solution of a Greenshields Riemann problem at x/t = xi.
inline double exact_riemann(double left, double right, double xi, const Environment& env) {
  const double v_f = env.free_flow_speed;
  const double rho_m = env.jam_density;
  auto q = [&](double r) { return r * v_f * (1.0 - r / rho_m); };
  auto speed = [&](double r) { return v_f * (1.0 - 2.0 * r / rho_m); };
  if (left < right) {
    const double shock = (q(right) - q(left)) / (right - left);
    return xi < shock ? left : right;
  }
  if (xi <= speed(left)) return left;
  if (xi >= speed(right)) return right;
  return rho_m * (v_f - xi) / (2.0 * v_f);
}

/// Position where a monotone jump in column `n` crosses `level`, linearly
/// interpolated between the bracketing nodes.
inline std::optional<double> locate_crossing(const DensityField& f, Eigen::Index n, double level) {
  for (Eigen::Index i = 0; i + 1 < f.grid.space_nodes(); ++i) {
    const double a = f.rho(i, n) - level;
    const double b = f.rho(i + 1, n) - level;
    if (a == 0.0) return f.grid.x(i);
    if ((a < 0.0) != (b < 0.0)) {
      return f.grid.x(i) + f.grid.dx() * a / (a - b);
    }
  }
  return std::nullopt;
}

/// Time column index of t on the grid.
inline Eigen::Index column_of(const Grid& g, double t) {
  return static_cast<Eigen::Index>(std::lround(t / g.dt()));
}

/// Space node index of x on the grid.
inline Eigen::Index row_of(const Grid& g, double x) {
  return static_cast<Eigen::Index>(std::lround((x - g.x_min()) / g.dx()));
}

}  // namespace tse::testing

#endif  // TSE_TESTS_SUPPORT_HPP
