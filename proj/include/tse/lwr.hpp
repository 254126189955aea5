#ifndef TSE_LWR_HPP
#define TSE_LWR_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tse {

/// Raised when an input falls outside the domain an operation is defined on.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Greenshields fundamental-diagram parameters for one operational setting.
struct Environment {
  double free_flow_speed = 25.0;  // m/s
  double jam_density = 0.15;      // veh/m

  Environment() = default;
  Environment(double v_f, double rho_m);

  double critical_density() const { return 0.5 * jam_density; }
  double capacity() const { return 0.25 * free_flow_speed * jam_density; }

  friend bool operator==(const Environment&, const Environment&) = default;
};

/// Rectangular space-time grid; nodes include both endpoints on each axis.
class Grid {
 public:
  Grid() : Grid(0.0, 1000.0, 2.0, 50.0, 0.1) {}
  Grid(double x_min, double x_max, double dx, double t_max, double dt);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double dx() const { return dx_; }
  double t_max() const { return t_max_; }
  double dt() const { return dt_; }

  Eigen::Index space_nodes() const { return space_nodes_; }
  Eigen::Index time_nodes() const { return time_nodes_; }
  Eigen::Index node_count() const { return space_nodes_ * time_nodes_; }

  double x(Eigen::Index i) const { return x_min_ + static_cast<double>(i) * dx_; }
  double t(Eigen::Index n) const { return static_cast<double>(n) * dt_; }

  /// Same extent with the spatial step divided by `factor`.
  Grid refined_in_space(int factor) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  double x_min_, x_max_, dx_, t_max_, dt_;
  Eigen::Index space_nodes_, time_nodes_;
};

/// Initial density, constant on each interval [b_k, b_{k+1}).
class PiecewiseConstantProfile {
 public:
  PiecewiseConstantProfile(std::vector<double> breakpoints, std::vector<double> values);

  /// The three-block initial condition used throughout the experiments.
  static PiecewiseConstantProfile reference();
  /// Two states joined at `jump` over [x_min, x_max].
  static PiecewiseConstantProfile riemann(double x_min, double jump, double x_max, double left,
                                          double right);
  static PiecewiseConstantProfile constant(double x_min, double x_max, double value);

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t piece_count() const { return values_.size(); }

  /// Piece index holding `x`, extending the end pieces to infinity.
  std::size_t piece_at(double x) const;
  double value_at(double x) const { return values_[piece_at(x)]; }

  double min_value() const;
  double max_value() const;

  /// Throws DomainError unless every value is within [0, rho_m] and the
  /// breakpoints cover the grid's extent.
  void validate_for(const Environment& env, const Grid& grid) const;

  friend bool operator==(const PiecewiseConstantProfile&,
                         const PiecewiseConstantProfile&) = default;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

/// rho(x, t) on a grid: rows are space nodes, columns are time nodes.
struct DensityField {
  Grid grid;
  Environment env;
  Eigen::MatrixXd rho;

  DensityField(Grid g, Environment e);
  DensityField(Grid g, Environment e, Eigen::MatrixXd values);

  double operator()(Eigen::Index i, Eigen::Index n) const { return rho(i, n); }
};

/// Cumulative vehicle count N(x, t) with rho = -dN/dx and q = dN/dt.
struct MoskowitzField {
  Grid grid;
  Environment env;
  Eigen::MatrixXd count;
};

// Fundamental diagram. All of these reject densities outside [0, rho_m].
double velocity(double rho, const Environment& env);
double flux(double rho, const Environment& env);
double flux_derivative(double rho, const Environment& env);
/// Convex transform Q*(u) = sup_rho [Q(rho) - u rho] on u in [-v_f, v_f].
double legendre_dual(double u, const Environment& env);

/// Greenshields flux without the range check; used to score fields that
/// are not guaranteed to be physical.
inline double flux_unchecked(double rho, const Environment& env) {
  return rho * env.free_flow_speed * (1.0 - rho / env.jam_density);
}
inline double flux_derivative_unchecked(double rho, const Environment& env) {
  return env.free_flow_speed * (1.0 - 2.0 * rho / env.jam_density);
}

/// Exact Riemann interface flux for the concave Greenshields flux,
/// written as min(demand(left), supply(right)).
double godunov_flux(double rho_left, double rho_right, const Environment& env);

/// Initial Moskowitz function M0(x) = -integral of the profile from x_min.
class InitialMoskowitz {
 public:
  InitialMoskowitz(const PiecewiseConstantProfile& profile, double origin);

  double operator()(double x) const;
  /// Slope of piece `k` is -values[k].
  const PiecewiseConstantProfile& profile() const { return profile_; }

 private:
  PiecewiseConstantProfile profile_;
  double origin_;
  std::vector<double> at_breakpoint_;
};

InitialMoskowitz initial_moskowitz(const PiecewiseConstantProfile& profile,
                                   const Environment& env, const Grid& grid);

/// Pointwise Lax-Hopf evaluation: returns (N, rho) at (x, t > 0).
std::pair<double, double> lax_hopf_point(const InitialMoskowitz& m0, const Environment& env,
                                         double x, double t);

/// Exact entropy solution on the whole line, initial data extended
/// constantly beyond the grid, evaluated at every grid node.
std::pair<MoskowitzField, DensityField> lax_hopf_solve(const PiecewiseConstantProfile& profile,
                                                       const Environment& env, const Grid& grid);

/// Sub-step count used by godunov_solve for one output step.
int godunov_substeps(const Environment& env, const Grid& grid, double cfl_target = 0.9);

/// First-order finite-volume solution. Cells are centred on the grid's
/// space nodes; outer ghost cells copy their neighbour (transmissive).
DensityField godunov_solve(const PiecewiseConstantProfile& profile, const Environment& env,
                           const Grid& grid);

/// Change in stored vehicles minus net boundary inflow, in vehicles.
/// Space and time integrals use the trapezoid rule on the grid.
double mass_balance(const DensityField& field);

/// Mean absolute node-wise difference between two fields on one grid.
double mean_abs_difference(const DensityField& a, const DensityField& b);

}  // namespace tse

#endif  // TSE_LWR_HPP
