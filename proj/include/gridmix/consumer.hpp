#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "gridmix/errors.hpp"
#include "gridmix/exp_poly.hpp"
#include "gridmix/ode.hpp"
#include "gridmix/params.hpp"
#include "gridmix/price.hpp"
#include "gridmix/riccati.hpp"

namespace gridmix {

struct AdmissibilityFlags {
  bool price_positive = true;
  bool x_in_range = true;  // 0 <= x_inf <= D
  bool q_positive = true;
};

struct StationaryOutcome {
  double p_bar = std::numeric_limits<double>::quiet_NaN();
  double x_inf = std::numeric_limits<double>::quiet_NaN();
  double q_inf = std::numeric_limits<double>::quiet_NaN();  // NaN when not computed
  double share = std::numeric_limits<double>::quiet_NaN();  // x_inf / D
  AdmissibilityFlags flags;

  bool admissible() const { return flags.price_positive && flags.x_in_range && flags.q_positive; }
};

struct PriceBounds {
  double P_floor;  // stationary price with zero distributed investment
  double P_D;      // stationary price at which distributed capacity covers demand
};

struct TrajectoryPoint {
  double t;
  double mean;
  double rate;  // expected control at t
};

struct ConsumerPolicy {
  ModelParams params;
  ScalarGains gains;
  PriceModel price;
  double rate_fast;      // rho + b^2 K_c / gamma
  double rate_slow;      // rho + b^2 Lambda_c / gamma
  double constant_term;  // (b theta - c rho) / (2 gamma rate_slow)

  double deviation_gain() const { return params.b * gains.K_c / params.gamma; }
  double mean_gain() const { return params.b * gains.Lambda_c / params.gamma; }
  // Decay rates of the deviation and of the mean under the optimal control.
  double deviation_decay() const { return params.b * deviation_gain(); }
  double mean_decay() const { return params.b * mean_gain(); }
};

namespace consumer {

inline ConsumerPolicy make_policy(const ModelParams& p, const PriceModel& price) {
  require_valid(p);
  ConsumerPolicy pol{p, riccati::scalar_gains(p), price, 0, 0, 0};
  const double a = p.b * p.b / p.gamma;
  pol.rate_fast = p.rho + a * pol.gains.K_c;
  pol.rate_slow = p.rho + a * pol.gains.Lambda_c;
  pol.constant_term = (p.b * p.theta - p.c * p.rho) / (2.0 * p.gamma * pol.rate_slow);
  return pol;
}

inline PriceBounds price_bounds(const ModelParams& p, const ScalarGains& g) {
  const double floor = derived_costs(p).net_distributed;
  return {floor, floor + 2.0 * p.sigma * p.sigma * g.K_c * p.D};
}

inline StationaryOutcome stationary_level(const ModelParams& p, const ScalarGains& g, double p_bar) {
  const double slope_inv = 2.0 * p.sigma * p.sigma * g.K_c;
  if (!(slope_inv > 0.0))
    throw DegenerateError("stationary distributed level needs sigma > 0 and K_c > 0");
  StationaryOutcome out;
  out.p_bar = p_bar;
  out.x_inf = (p_bar + p.theta - derived_costs(p).annuity_distributed) / slope_inv;
  out.share = out.x_inf / p.D;
  out.flags.price_positive = p_bar > 0.0;
  out.flags.x_in_range = out.x_inf >= 0.0 && out.x_inf <= p.D;
  return out;
}

inline double optimal_rate(const ConsumerPolicy& pol, double t, double x, double mean_x, double p_t) {
  using price::Kernel;
  const auto& p = pol.params;
  const double half = p.b / (2.0 * p.gamma);
  const double cond_fast = price::discounted_kernel(pol.price, t, pol.rate_fast, p_t, Kernel::conditional);
  const double unc_slow = price::discounted_kernel(pol.price, t, pol.rate_slow, p_t, Kernel::unconditional);
  const double unc_fast = price::discounted_kernel(pol.price, t, pol.rate_fast, p_t, Kernel::unconditional);
  return -pol.deviation_gain() * (x - mean_x) - pol.mean_gain() * mean_x + pol.constant_term +
         half * cond_fast + half * (unc_slow - unc_fast);
}

// Drift of the mean, b E[alpha_t], as an exponential polynomial in t
// (without the x0 transient). Affine price laws only.
inline std::optional<ExpPoly> mean_forcing(const ConsumerPolicy& pol) {
  const auto pm = price::mean_curve(pol.price);
  if (!pm) return std::nullopt;
  const auto& p = pol.params;
  return ExpPoly::constant(p.b * pol.constant_term) +
         (p.b * p.b / (2.0 * p.gamma)) * pm->forward_discount(pol.rate_slow);
}

// t -> E[X_t] in closed form for affine price laws.
inline std::optional<ExpPoly> mean_curve(const ConsumerPolicy& pol) {
  const auto forcing = mean_forcing(pol);
  if (!forcing) return std::nullopt;
  const double beta = pol.mean_decay();
  return ExpPoly::exponential(pol.params.x0, beta) + forcing->smooth(beta);
}

namespace detail {

// b E[alpha_t] for any price law, the kernels going through quadrature when needed.
inline double mean_drift(const ConsumerPolicy& pol, double t, double m) {
  const auto& p = pol.params;
  const double k = price::discounted_kernel(pol.price, t, pol.rate_slow, 0.0, price::Kernel::unconditional);
  return -pol.mean_decay() * m + p.b * pol.constant_term + p.b * p.b / (2.0 * p.gamma) * k;
}

// Integrates the mean ODE across a sorted grid starting at 0.
inline std::vector<double> integrate_mean(const ConsumerPolicy& pol, const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  Eigen::Matrix<double, 1, 1> y;
  y << pol.params.x0;
  double t = 0.0;
  auto f = [&](double s, const Eigen::Matrix<double, 1, 1>& v) {
    Eigen::Matrix<double, 1, 1> d;
    d << mean_drift(pol, s, v(0));
    return d;
  };
  for (double g : grid) {
    if (g > t) {
      auto r = integrate_dopri(f, y, t, g, 1e-3, 1e-10, 1e-10 * (1.0 + std::abs(y(0))), 10000000,
                               [](double, const auto&, const auto&) { return false; });
      y = r.y;
      t = g;
    }
    out.push_back(y(0));
  }
  return out;
}

}  // namespace detail

inline double mean_at(const ConsumerPolicy& pol, double t) {
  if (const auto c = mean_curve(pol)) return (*c)(t);
  return detail::integrate_mean(pol, {t}).front();
}

// (t, E[X_t], E[alpha_t]) on a sorted grid starting at 0.
inline std::vector<TrajectoryPoint> mean_trajectory(const ConsumerPolicy& pol, const std::vector<double>& grid) {
  std::vector<double> means;
  if (const auto c = mean_curve(pol)) {
    for (double t : grid) means.push_back((*c)(t));
  } else {
    means = detail::integrate_mean(pol, grid);
  }
  std::vector<TrajectoryPoint> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    // The rate is affine in p_t, so plugging E[P_t] gives E[alpha_t].
    out.push_back({t, means[i], optimal_rate(pol, t, means[i], means[i], price::mean(pol.price, t))});
  }
  return out;
}

// tau -> E[X_{t+tau} | F_t] given X_t = x_t and P_t = p_t. Affine price laws only.
inline std::optional<ExpPoly> conditional_curve(const ConsumerPolicy& pol, double t, double x_t, double p_t) {
  const auto m = mean_curve(pol);
  const auto pc = price::conditional_curve(pol.price, p_t);
  const auto pm = price::mean_curve(pol.price);
  if (!m || !pc || !pm) return std::nullopt;
  const auto& p = pol.params;
  const double k = pol.deviation_decay();
  // The deviation from the mean decays at b^2 K_c/gamma, driven by the gap
  // between conditional and unconditional fast kernels.
  const ExpPoly drive = pc->forward_discount(pol.rate_fast) - pm->shifted(t).forward_discount(pol.rate_fast);
  return m->shifted(t) + ExpPoly::exponential(x_t - (*m)(t), k) +
         (p.b * p.b / (2.0 * p.gamma)) * drive.smooth(k);
}

// E[D - X_s | F_t] given X_t = x_t and P_t = p_t.
inline double residual_demand_forecast(const ConsumerPolicy& pol, double t, double s, double x_t, double p_t) {
  if (s < t) throw DomainError("residual_demand_forecast needs s >= t");
  if (const auto c = conditional_curve(pol, t, x_t, p_t)) return pol.params.D - (*c)(s - t);
  // Fallback: integrate d/ds E[X_s|F_t] = b E[alpha_s|F_t] numerically.
  const auto& p = pol.params;
  const double m_t = mean_at(pol, t);
  Eigen::Vector2d y(x_t, m_t);  // conditional mean, unconditional mean
  auto f = [&](double u, const Eigen::Vector2d& v) -> Eigen::Vector2d {
    const double cond_fast = price::detail::discounted_integral(
        [&](double w) { return price::conditional_mean(pol.price, t, u + w, p_t); }, pol.rate_fast,
        std::get<price::General>(pol.price).bound);
    const double unc_slow = price::discounted_kernel(pol.price, u, pol.rate_slow, 0.0, price::Kernel::unconditional);
    const double unc_fast = price::discounted_kernel(pol.price, u, pol.rate_fast, 0.0, price::Kernel::unconditional);
    const double half = p.b / (2.0 * p.gamma);
    const double rate = -pol.deviation_gain() * (v(0) - v(1)) - pol.mean_gain() * v(1) + pol.constant_term +
                        half * cond_fast + half * (unc_slow - unc_fast);
    return {p.b * rate, detail::mean_drift(pol, u, v(1))};
  };
  if (s > t) {
    y = integrate_dopri(f, y, t, s, 1e-3, 1e-9, 1e-9 * (1.0 + std::abs(x_t)), 10000000,
                        [](double, const auto&, const auto&) { return false; })
            .y;
  }
  return p.D - y(0);
}

// Price argument defaults to E[P_t], the forecast a firm without price information would use.
inline double residual_demand_forecast(const ConsumerPolicy& pol, double t, double s, double x_t) {
  return residual_demand_forecast(pol, t, s, x_t, price::mean(pol.price, t));
}

// Constant part of the Y coefficient: (b c Lambda_c + gamma theta)/(rho gamma + b^2 Lambda_c).
inline double y_constant(const ConsumerPolicy& pol) {
  const auto& p = pol.params;
  return (p.b * p.c * pol.gains.Lambda_c + p.gamma * p.theta) /
         (p.rho * p.gamma + p.b * p.b * pol.gains.Lambda_c);
}

// V_C = Lambda_c x0^2 + E[Y_0] x0 + R_0: the optimal cost net of the
// control-independent part D (int e^{-rho t} E[P_t] dt + theta/rho).
inline double consumer_value(const ConsumerPolicy& pol) {
  const auto& p = pol.params;
  const double y0 = -price::discounted_kernel(pol.price, 0.0, pol.rate_slow, 0.0, price::Kernel::unconditional) -
                    y_constant(pol);
  // E[(b Y_s + c)^2] = (b E[Y_s] + c)^2 + b^2 Var[Y_s]; the random part of Y_s
  // is the conditional fast kernel, affine in P_s with slope 1/(rate_fast + kappa).
  double mean_part = 0.0;
  double var_part = 0.0;
  if (const auto pm = price::mean_curve(pol.price)) {
    const ExpPoly ey = -1.0 * pm->forward_discount(pol.rate_slow) - y_constant(pol);
    const ExpPoly sq = (p.b * ey + p.c) * (p.b * ey + p.c);
    mean_part = sq.discounted_from(p.rho, 0.0);
    const double slope = 1.0 / (pol.rate_fast + price::mean_reversion(pol.price));
    var_part = p.b * p.b * slope * slope * price::discounted_variance(pol.price, p.rho);
  } else {
    const auto& g = std::get<price::General>(pol.price);
    const double bound = std::abs(p.b) * (g.bound / pol.rate_slow + std::abs(y_constant(pol))) + std::abs(p.c);
    mean_part = price::detail::discounted_integral(
        [&](double s) {
          const double ey = -price::discounted_kernel(pol.price, s, pol.rate_slow, 0.0, price::Kernel::unconditional) -
                            y_constant(pol);
          return (p.b * ey + p.c) * (p.b * ey + p.c);
        },
        p.rho, bound * bound);
    // The conditional mean alone does not identify Var[Y_s] for a random general law.
    if (g.variance) throw DomainError("consumer_value needs an affine law when the price is random");
  }
  const double r0 = -(mean_part + var_part) / (4.0 * p.gamma);
  return pol.gains.Lambda_c * p.x0 * p.x0 + y0 * p.x0 + r0;
}

// Full expected cost J_c of the optimal control.
inline double consumer_total_cost(const ConsumerPolicy& pol) {
  const auto& p = pol.params;
  const double price_annuity =
      price::discounted_kernel(pol.price, 0.0, p.rho, 0.0, price::Kernel::unconditional);
  return p.D * (price_annuity + p.theta / p.rho) + consumer_value(pol);
}

}  // namespace consumer
}  // namespace gridmix
