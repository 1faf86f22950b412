#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "gridmix/consumer.hpp"
#include "gridmix/errors.hpp"
#include "gridmix/exp_poly.hpp"
#include "gridmix/params.hpp"
#include "gridmix/price.hpp"
#include "gridmix/riccati.hpp"

namespace gridmix {

struct FirmPolicy {
  ModelParams params;
  double K_f;
  double rate;           // rho + K_f / delta
  double constant_term;  // (pi + h rho) / (2 delta rate)

  double gain() const { return K_f / params.delta; }
  // Constant part of the Y coefficient: (pi - K_f h/delta) / rate.
  double y_constant() const { return (params.pi - K_f * params.h / params.delta) / rate; }
};

namespace firm {

inline FirmPolicy make_policy(const ModelParams& p) {
  require_valid(p);
  const double kf = riccati::firm_gain(p);
  const double rate = p.rho + kf / p.delta;
  return {p, kf, rate, (p.pi + p.h * p.rho) / (2.0 * p.delta * rate)};
}

// Forecasts are tau -> E[D - X_{t+tau} | F_t] when given as exponential
// polynomials, and s -> E[D - X_s | F_t] in absolute time when given as functions.
inline double discounted_forecast(const FirmPolicy& pol, const ExpPoly& forecast) {
  return forecast.discounted_from(pol.rate, 0.0);
}

inline double discounted_forecast(const FirmPolicy& pol, double t, const std::function<double(double)>& forecast,
                                  double bound) {
  double v = 0.0;
  try {
    v = price::detail::discounted_integral([&](double u) { return forecast(t + u); }, pol.rate, bound);
  } catch (const DomainError&) {
    throw DomainError("forecast is not integrable against the firm's discount kernel");
  }
  if (!std::isfinite(v)) throw DomainError("forecast is not integrable against the firm's discount kernel");
  return v;
}

inline double optimal_rate(const FirmPolicy& pol, double q, double discounted) {
  const auto& p = pol.params;
  return -pol.gain() * q + (p.lambda / p.delta) * discounted - pol.constant_term;
}

inline double optimal_rate(const FirmPolicy& pol, double /*t*/, double q, const ExpPoly& forecast) {
  return optimal_rate(pol, q, discounted_forecast(pol, forecast));
}

inline double optimal_rate(const FirmPolicy& pol, double t, double q, const std::function<double(double)>& forecast,
                           double bound) {
  return optimal_rate(pol, q, discounted_forecast(pol, t, forecast, bound));
}

// t -> E[Q_t] given the consumer's mean path t -> E[X_t].
inline ExpPoly mean_curve(const FirmPolicy& pol, const ExpPoly& consumer_mean) {
  const auto& p = pol.params;
  const double f = pol.gain();
  const ExpPoly discounted = (p.D - consumer_mean).forward_discount(pol.rate);
  const ExpPoly drift = (p.lambda / p.delta) * discounted - pol.constant_term;
  return ExpPoly::exponential(p.q0, f) + drift.smooth(f);
}

// (t, E[Q_t], E[nu_t]) on a sorted grid starting at 0.
inline std::vector<TrajectoryPoint> mean_trajectory(const FirmPolicy& pol, const ExpPoly& consumer_mean,
                                                    const std::vector<double>& grid) {
  const ExpPoly q = mean_curve(pol, consumer_mean);
  const ExpPoly discounted = (pol.params.D - consumer_mean).forward_discount(pol.rate);
  std::vector<TrajectoryPoint> out;
  out.reserve(grid.size());
  for (double t : grid) {
    const double mq = q(t);
    out.push_back({t, mq, optimal_rate(pol, mq, discounted(t))});
  }
  return out;
}

inline StationaryOutcome stationary_level(const ModelParams& p, double x_inf) {
  if (!(p.lambda > 0.0)) throw DegenerateError("stationary centralised level needs lambda > 0");
  StationaryOutcome out;
  out.x_inf = x_inf;
  out.share = x_inf / p.D;
  out.q_inf = p.D - x_inf - (p.pi + p.rho * p.h) / (2.0 * p.lambda);
  out.flags.x_in_range = x_inf >= 0.0 && x_inf <= p.D;
  out.flags.q_positive = out.q_inf > 0.0;
  return out;
}

// Firm value K_f q^2 + Y_t q + R_t when the residual demand follows the
// deterministic forecast tau -> forecast(tau) from time t.
inline double value_given_forecast(const FirmPolicy& pol, double q, const ExpPoly& forecast) {
  const auto& p = pol.params;
  const ExpPoly y = -2.0 * p.lambda * forecast.forward_discount(pol.rate) + pol.y_constant();
  const ExpPoly yh = y + p.h;
  const double r = -(yh * yh).discounted_from(p.rho, 0.0) / (4.0 * p.delta);
  return pol.K_f * q * q + y(0.0) * q + r;
}

// Total discounted firm cost at a constant price with the consumer at its
// stationary level and initial centralised capacity q.
inline double stationary_value(const ModelParams& p, double K_f, const ScalarGains& gains, double p_bar, double q) {
  const double H = p.D - consumer::stationary_level(p, gains, p_bar).x_inf;
  const double rd = p.rho * p.delta + K_f;
  const double y0 = -2.0 * p.lambda * p.delta * H / rd + (p.delta * p.pi - K_f * p.h) / rd;
  return (p.lambda * H * H - p_bar * H) / p.rho - (y0 + p.h) * (y0 + p.h) / (4.0 * p.delta * p.rho) + y0 * q +
         K_f * q * q;
}

}  // namespace firm
}  // namespace gridmix
