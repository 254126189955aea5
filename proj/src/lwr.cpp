#include "tse/lwr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tse {

namespace {

constexpr double kIntegralTolerance = 1e-9;

Eigen::Index integral_count(double span, double step, const char* what) {
  const double ratio = span / step;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > kIntegralTolerance * std::max(1.0, std::abs(ratio))) {
    std::ostringstream msg;
    msg << what << ": step " << step << " does not divide span " << span;
    throw DomainError(msg.str());
  }
  return static_cast<Eigen::Index>(rounded) + 1;
}

void check_density(double rho, const Environment& env, const char* op) {
  if (!(rho >= 0.0 && rho <= env.jam_density)) {
    std::ostringstream msg;
    msg << op << ": density " << rho << " outside [0, " << env.jam_density << "]";
    throw DomainError(msg.str());
  }
}

}  // namespace

Environment::Environment(double v_f, double rho_m) : free_flow_speed(v_f), jam_density(rho_m) {
  if (!(v_f > 0.0) || !(rho_m > 0.0) || !std::isfinite(v_f) || !std::isfinite(rho_m)) {
    throw DomainError("environment requires v_f > 0 and rho_m > 0");
  }
}

Grid::Grid(double x_min, double x_max, double dx, double t_max, double dt)
    : x_min_(x_min), x_max_(x_max), dx_(dx), t_max_(t_max), dt_(dt) {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(t_max)) {
    throw DomainError("grid bounds must be finite");
  }
  if (!(x_max > x_min)) throw DomainError("grid requires x_max > x_min");
  if (!(dx > 0.0) || !(dt > 0.0)) throw DomainError("grid steps must be positive");
  if (!(t_max > 0.0)) throw DomainError("grid requires t_max > 0");
  space_nodes_ = integral_count(x_max - x_min, dx, "space axis");
  time_nodes_ = integral_count(t_max, dt, "time axis");
  if (space_nodes_ < 2 || time_nodes_ < 2) throw DomainError("grid needs at least 2x2 nodes");
}

Grid Grid::refined_in_space(int factor) const {
  return Grid(x_min_, x_max_, dx_ / factor, t_max_, dt_);
}

PiecewiseConstantProfile::PiecewiseConstantProfile(std::vector<double> breakpoints,
                                                   std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
  if (breakpoints_.size() < 2) throw DomainError("profile needs at least two breakpoints");
  if (values_.size() + 1 != breakpoints_.size()) {
    throw DomainError("profile needs exactly one value per interval");
  }
  for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
    if (!(breakpoints_[k] > breakpoints_[k - 1])) {
      throw DomainError("profile breakpoints must be strictly ascending");
    }
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("profile values must be finite and >= 0");
  }
}

PiecewiseConstantProfile PiecewiseConstantProfile::reference() {
  return PiecewiseConstantProfile({0.0, 200.0, 500.0, 1000.0}, {0.13, 0.06, 0.03});
}

PiecewiseConstantProfile PiecewiseConstantProfile::riemann(double x_min, double jump, double x_max,
                                                           double left, double right) {
  return PiecewiseConstantProfile({x_min, jump, x_max}, {left, right});
}

PiecewiseConstantProfile PiecewiseConstantProfile::constant(double x_min, double x_max,
                                                            double value) {
  return PiecewiseConstantProfile({x_min, x_max}, {value});
}

std::size_t PiecewiseConstantProfile::piece_at(double x) const {
  // Interior breakpoints b_1..b_{K-1}; piece k covers [b_k, b_{k+1}).
  const auto first = breakpoints_.begin() + 1;
  const auto last = breakpoints_.end() - 1;
  return static_cast<std::size_t>(std::upper_bound(first, last, x) - first);
}

double PiecewiseConstantProfile::min_value() const {
  return *std::min_element(values_.begin(), values_.end());
}

double PiecewiseConstantProfile::max_value() const {
  return *std::max_element(values_.begin(), values_.end());
}

void PiecewiseConstantProfile::validate_for(const Environment& env, const Grid& grid) const {
  for (double v : values_) check_density(v, env, "profile");
  const double tol = kIntegralTolerance * std::max(1.0, std::abs(grid.x_max() - grid.x_min()));
  if (breakpoints_.front() > grid.x_min() + tol || breakpoints_.back() < grid.x_max() - tol) {
    throw DomainError("profile breakpoints do not cover the grid");
  }
}

DensityField::DensityField(Grid g, Environment e)
    : grid(std::move(g)), env(e), rho(Eigen::MatrixXd::Zero(grid.space_nodes(), grid.time_nodes())) {}

DensityField::DensityField(Grid g, Environment e, Eigen::MatrixXd values)
    : grid(std::move(g)), env(e), rho(std::move(values)) {
  if (rho.rows() != grid.space_nodes() || rho.cols() != grid.time_nodes()) {
    throw DomainError("density array shape does not match grid");
  }
}

double velocity(double rho, const Environment& env) {
  check_density(rho, env, "velocity");
  return env.free_flow_speed * (1.0 - rho / env.jam_density);
}

double flux(double rho, const Environment& env) {
  check_density(rho, env, "flux");
  return flux_unchecked(rho, env);
}

double flux_derivative(double rho, const Environment& env) {
  check_density(rho, env, "flux_derivative");
  return flux_derivative_unchecked(rho, env);
}

double legendre_dual(double u, const Environment& env) {
  const double v_f = env.free_flow_speed;
  if (!(u >= -v_f && u <= v_f)) {
    std::ostringstream msg;
    msg << "legendre_dual: speed " << u << " outside [" << -v_f << ", " << v_f << "]";
    throw DomainError(msg.str());
  }
  const double gap = v_f - u;
  return env.jam_density * gap * gap / (4.0 * v_f);
}

double godunov_flux(double rho_left, double rho_right, const Environment& env) {
  check_density(rho_left, env, "godunov_flux");
  check_density(rho_right, env, "godunov_flux");
  const double critical = env.critical_density();
  const double demand = rho_left <= critical ? flux_unchecked(rho_left, env) : env.capacity();
  const double supply = rho_right <= critical ? env.capacity() : flux_unchecked(rho_right, env);
  return std::min(demand, supply);
}

InitialMoskowitz::InitialMoskowitz(const PiecewiseConstantProfile& profile, double origin)
    : profile_(profile), origin_(origin) {
  const auto& b = profile_.breakpoints();
  const auto& v = profile_.values();
  // Cumulative value at each breakpoint, anchored so that M0(origin) = 0.
  at_breakpoint_.resize(b.size());
  at_breakpoint_[0] = 0.0;
  for (std::size_t k = 1; k < b.size(); ++k) {
    at_breakpoint_[k] = at_breakpoint_[k - 1] - v[k - 1] * (b[k] - b[k - 1]);
  }
  const double shift = (*this)(origin_);
  for (double& m : at_breakpoint_) m -= shift;
}

double InitialMoskowitz::operator()(double x) const {
  const std::size_t k = profile_.piece_at(x);
  return at_breakpoint_[k] - profile_.values()[k] * (x - profile_.breakpoints()[k]);
}

InitialMoskowitz initial_moskowitz(const PiecewiseConstantProfile& profile,
                                   const Environment& env, const Grid& grid) {
  profile.validate_for(env, grid);
  return InitialMoskowitz(profile, grid.x_min());
}

std::pair<double, double> lax_hopf_point(const InitialMoskowitz& m0, const Environment& env,
                                         double x, double t) {
  const auto& profile = m0.profile();
  const auto& b = profile.breakpoints();
  const auto& values = profile.values();
  const double v_f = env.free_flow_speed;
  const double rho_m = env.jam_density;

  double best_value = std::numeric_limits<double>::infinity();
  double best_rho = 0.0;
  auto offer = [&](double value, double rho) {
    const double tol = 1e-12 * std::max(1.0, std::abs(value));
    if (value < best_value - tol) {
      best_value = value;
      best_rho = rho;
    } else if (std::abs(value - best_value) <= tol && rho > best_rho) {
      best_value = std::min(value, best_value);
      best_rho = rho;
    }
  };
  auto dual = [&](double u) {
    const double gap = v_f - u;
    return rho_m * gap * gap / (4.0 * v_f);
  };

  // Domain endpoints u = +-v_f: M0 is linear there, density is the piece value.
  for (double u : {v_f, -v_f}) {
    const double y = x - t * u;
    offer(m0(y) + t * dual(u), values[profile.piece_at(y)]);
  }
  // Kinks of M0 (interior breakpoints): the fan value at the connecting speed.
  for (std::size_t k = 1; k + 1 < b.size(); ++k) {
    const double u = (x - b[k]) / t;
    if (u < -v_f || u > v_f) continue;
    offer(m0(b[k]) + t * dual(u), rho_m * (v_f - u) / (2.0 * v_f));
  }
  // Stationary point of each piece, valid only when its foot lands on that piece.
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double u = flux_derivative_unchecked(values[k], env);
    const double y = x - t * u;
    const bool left_ok = k == 0 || y >= b[k];
    const bool right_ok = k + 1 == values.size() || y <= b[k + 1];
    if (!left_ok || !right_ok) continue;
    offer(m0(y) + t * dual(u), values[k]);
  }
  return {best_value, best_rho};
}

std::pair<MoskowitzField, DensityField> lax_hopf_solve(const PiecewiseConstantProfile& profile,
                                                       const Environment& env, const Grid& grid) {
  const InitialMoskowitz m0 = initial_moskowitz(profile, env, grid);
  const Eigen::Index nx = grid.space_nodes();
  const Eigen::Index nt = grid.time_nodes();
  MoskowitzField cumulative{grid, env, Eigen::MatrixXd(nx, nt)};
  DensityField density(grid, env);

  for (Eigen::Index i = 0; i < nx; ++i) {
    const double x = grid.x(i);
    cumulative.count(i, 0) = m0(x);
    density.rho(i, 0) = profile.value_at(x);
  }
  for (Eigen::Index n = 1; n < nt; ++n) {
    const double t = grid.t(n);
    for (Eigen::Index i = 0; i < nx; ++i) {
      const auto [value, rho] = lax_hopf_point(m0, env, grid.x(i), t);
      cumulative.count(i, n) = value;
      density.rho(i, n) = rho;
    }
  }
  return {std::move(cumulative), std::move(density)};
}

int godunov_substeps(const Environment& env, const Grid& grid, double cfl_target) {
  const double courant = env.free_flow_speed * grid.dt() / grid.dx();
  // Guard against ceil() rounding up an exact ratio.
  return std::max(1, static_cast<int>(std::ceil(courant / cfl_target - 1e-12)));
}

DensityField godunov_solve(const PiecewiseConstantProfile& profile, const Environment& env,
                           const Grid& grid) {
  const InitialMoskowitz m0 = initial_moskowitz(profile, env, grid);
  const Eigen::Index cells = grid.space_nodes();
  const double dx = grid.dx();
  const int substeps = godunov_substeps(env, grid);
  const double ratio = (grid.dt() / substeps) / dx;

  DensityField out(grid, env);
  Eigen::VectorXd rho(cells);
  for (Eigen::Index i = 0; i < cells; ++i) {
    const double centre = grid.x(i);
    rho(i) = (m0(centre - 0.5 * dx) - m0(centre + 0.5 * dx)) / dx;
  }
  out.rho.col(0) = rho;

  // interface(j) sits between cells j-1 and j; ghosts copy the edge cells.
  Eigen::VectorXd interface(cells + 1);
  for (Eigen::Index n = 1; n < grid.time_nodes(); ++n) {
    for (int s = 0; s < substeps; ++s) {
      interface(0) = godunov_flux(rho(0), rho(0), env);
      for (Eigen::Index j = 1; j < cells; ++j) {
        interface(j) = godunov_flux(rho(j - 1), rho(j), env);
      }
      interface(cells) = godunov_flux(rho(cells - 1), rho(cells - 1), env);
      rho -= ratio * (interface.tail(cells) - interface.head(cells));
      // Roundoff can step a hair past the physical bounds at jam or vacuum.
      rho = rho.cwiseMax(0.0).cwiseMin(env.jam_density);
    }
    out.rho.col(n) = rho;
  }
  return out;
}

double mass_balance(const DensityField& field) {
  const Grid& g = field.grid;
  const Eigen::Index nx = g.space_nodes();
  const Eigen::Index nt = g.time_nodes();
  auto trapezoid = [](const Eigen::VectorXd& f, double h) {
    return h * (f.sum() - 0.5 * (f(0) + f(f.size() - 1)));
  };
  const double stored_change =
      trapezoid(field.rho.col(nt - 1), g.dx()) - trapezoid(field.rho.col(0), g.dx());
  Eigen::VectorXd net_inflow(nt);
  for (Eigen::Index n = 0; n < nt; ++n) {
    net_inflow(n) = flux_unchecked(field.rho(0, n), field.env) -
                    flux_unchecked(field.rho(nx - 1, n), field.env);
  }
  return stored_change - trapezoid(net_inflow, g.dt());
}

double mean_abs_difference(const DensityField& a, const DensityField& b) {
  if (!(a.grid == b.grid)) throw DomainError("fields live on different grids");
  return (a.rho - b.rho).cwiseAbs().mean();
}

}  // namespace tse
