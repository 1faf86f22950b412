#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "gridmix/consumer.hpp"
#include "gridmix/errors.hpp"
#include "gridmix/firm.hpp"
#include "gridmix/matrix_exp.hpp"
#include "gridmix/parallel.hpp"
#include "gridmix/params.hpp"
#include "gridmix/riccati.hpp"

namespace gridmix {

struct PlannerSolution {
  ModelParams params;
  SareSolution sare;
  Eigen::Vector2d Theta;  // stationary control offset, in (b alpha, nu) units
  Eigen::Vector2d Phi;    // stationary (X, Q) levels
  Eigen::Matrix2d N;      // diag(gamma/b^2, delta)
  Eigen::Vector2d T_vec;  // linear state costs (-2 lambda D - theta, -2 lambda D + pi)
  Eigen::Vector2d U_vec;  // linear control costs (c/b, h)
  Eigen::Matrix2d decay;  // N^-1 Lambda, generator of the mean dynamics
};

struct PlannerMeanPoint {
  double t;
  double mean_x;
  double mean_q;
};

struct PlannerRates {
  double alpha;
  double nu;
};

struct ScanRow {
  double gamma;
  double delta;
  double K11;
  double x_inf;
  double share;
  bool violates_gamma = false;  // x_inf rose when gamma increased
  bool violates_delta = false;  // x_inf rose when delta increased
};

namespace planner {

namespace detail {
inline double phi1(const ModelParams& p, double K11) {
  const double s2 = p.sigma * p.sigma;
  if (!(s2 * K11 > 0.0)) throw DegenerateError("planner stationary mix needs sigma > 0");
  const auto d = derived_costs(p);
  return (d.total_centralised - d.net_distributed) / (2.0 * s2 * K11);
}
}  // namespace detail

inline PlannerSolution solve(const ModelParams& p, const SareOptions& opt = {}) {
  PlannerSolution s;
  s.params = p;
  s.sare = riccati::solve_sare(p, opt);
  s.N << p.gamma / (p.b * p.b), 0.0, 0.0, p.delta;
  s.T_vec << -2.0 * p.lambda * p.D - p.theta, -2.0 * p.lambda * p.D + p.pi;
  s.U_vec << p.c / p.b, p.h;
  const Eigen::Vector2d v = s.T_vec + p.rho * s.U_vec;
  const Eigen::Matrix2d M = s.sare.Lambda + p.rho * s.N;
  if (!(std::abs(M.determinant()) > 0.0)) throw DegenerateError("stationary control system is singular");
  s.Theta = -0.5 * M.partialPivLu().solve(v);
  const double f1 = detail::phi1(p, s.sare.K(0, 0));
  s.Phi << f1, p.D - f1 - (p.pi + p.rho * p.h) / (2.0 * p.lambda);
  s.decay = s.N.inverse() * s.sare.Lambda;
  return s;
}

// exp(-N^-1 Lambda t)
inline Eigen::Matrix2d gamma_matrix(const PlannerSolution& sol, double t) {
  if (t < 0.0) throw DomainError("gamma_matrix needs t >= 0");
  return expm2(-sol.decay * t);
}

inline Eigen::Vector2d mean_at(const PlannerSolution& sol, double t) {
  const Eigen::Vector2d z0(sol.params.x0, sol.params.q0);
  return gamma_matrix(sol, t) * (z0 - sol.Phi) + sol.Phi;
}

inline std::vector<PlannerMeanPoint> mean_trajectories(const PlannerSolution& sol, const std::vector<double>& grid) {
  std::vector<PlannerMeanPoint> out;
  out.reserve(grid.size());
  for (double t : grid) {
    const Eigen::Vector2d m = mean_at(sol, t);
    out.push_back({t, m(0), m(1)});
  }
  return out;
}

inline PlannerRates optimal_rates(const PlannerSolution& sol, double /*t*/, double x, double q, double mean_x,
                                  double mean_q) {
  const auto& p = sol.params;
  const auto& K = sol.sare.K;
  const auto& L = sol.sare.Lambda;
  const double dx = x - mean_x;
  const double dq = q - mean_q;
  const double bg = p.b / p.gamma;
  const double alpha = -bg * (K(0, 0) * dx + K(0, 1) * dq) - bg * (L(0, 0) * mean_x + L(0, 1) * mean_q) +
                       sol.Theta(0) / p.b;
  const double nu = -(K(0, 1) * dx + K(1, 1) * dq) / p.delta - (L(0, 1) * mean_x + L(1, 1) * mean_q) / p.delta +
                    sol.Theta(1);
  return {alpha, nu};
}

inline StationaryOutcome stationary_mix(const ModelParams& p, double K11) {
  const double x = detail::phi1(p, K11);
  StationaryOutcome out = firm::stationary_level(p, x);
  out.flags.x_in_range = x >= 0.0 && x <= p.D;
  return out;
}

inline StationaryOutcome stationary_mix(const ModelParams& p) {
  return stationary_mix(p, riccati::solve_sare(p).K(0, 0));
}

// K11 and the planner's distributed level over a gamma x delta grid, row-major
// in gamma. Violations flag a level that rose along an increasing axis.
inline std::vector<ScanRow> flexibility_scan(const ModelParams& p, const std::vector<double>& gamma_grid,
                                             const std::vector<double>& delta_grid, const SareOptions& opt = {}) {
  for (double g : gamma_grid)
    if (!(g > 0.0)) throw DomainError("flexibility_scan needs positive gamma values");
  for (double d : delta_grid)
    if (!(d > 0.0)) throw DomainError("flexibility_scan needs positive delta values");
  const std::size_t ng = gamma_grid.size(), nd = delta_grid.size();
  std::vector<ScanRow> rows(ng * nd);
  parallel_for(rows.size(), [&](std::size_t k) {
    ModelParams q = p;
    q.gamma = gamma_grid[k / nd];
    q.delta = delta_grid[k % nd];
    const double K11 = riccati::solve_sare(q, opt).K(0, 0);
    const double x = detail::phi1(q, K11);
    rows[k] = {q.gamma, q.delta, K11, x, x / q.D};
  });
  for (std::size_t i = 0; i < ng; ++i) {
    for (std::size_t j = 0; j < nd; ++j) {
      auto& r = rows[i * nd + j];
      if (i > 0 && gamma_grid[i] > gamma_grid[i - 1] && r.x_inf > rows[(i - 1) * nd + j].x_inf)
        r.violates_gamma = true;
      if (j > 0 && delta_grid[j] > delta_grid[j - 1] && r.x_inf > rows[i * nd + j - 1].x_inf)
        r.violates_delta = true;
    }
  }
  return rows;
}

}  // namespace planner
}  // namespace gridmix
