#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "gridmix/errors.hpp"
#include "gridmix/exp_poly.hpp"

namespace gridmix {

namespace price {

struct Constant {
  double p_bar;
};

// Driftless; simulated as geometric Brownian motion with volatility vol.
struct Martingale {
  double p_init;
  double vol = 0.0;
};

struct OrnsteinUhlenbeck {
  double p_init;
  double kappa;
  double p_bar;
  double vol = 0.0;
};

// Any other law, described only through its conditional mean. Kernels fall
// back to quadrature; Monte Carlo is unavailable.
struct General {
  std::function<double(double t, double s, double p_t)> conditional_mean;
  std::function<double(double s)> variance;  // Var[P_s]; empty means deterministic
  double p_init = 0.0;
  double bound = 0.0;  // sup_s |E[P_s | F_t]|, sets the truncation horizon
  std::optional<double> stationary;
};

}  // namespace price

using PriceModel =
    std::variant<price::Constant, price::Martingale, price::OrnsteinUhlenbeck, price::General>;

namespace price {

enum class Kernel { conditional, unconditional };

inline constexpr double quadrature_tol = 1e-8;

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

inline double initial(const PriceModel& m) {
  return std::visit(overloaded{[](const Constant& c) { return c.p_bar; },
                               [](const Martingale& g) { return g.p_init; },
                               [](const OrnsteinUhlenbeck& o) { return o.p_init; },
                               [](const General& g) { return g.p_init; }},
                    m);
}

inline double conditional_mean(const PriceModel& m, double t, double s, double p_t) {
  if (s < t) throw DomainError("conditional_mean needs s >= t");
  return std::visit(
      overloaded{[](const Constant& c) { return c.p_bar; },
                 [&](const Martingale&) { return p_t; },
                 [&](const OrnsteinUhlenbeck& o) {
                   return o.p_bar + (p_t - o.p_bar) * std::exp(-o.kappa * (s - t));
                 },
                 [&](const General& g) { return g.conditional_mean(t, s, p_t); }},
      m);
}

// E[P_s]
inline double mean(const PriceModel& m, double s) {
  return conditional_mean(m, 0.0, s, initial(m));
}

inline std::optional<double> stationary_mean(const PriceModel& m) {
  return std::visit(overloaded{[](const Constant& c) -> std::optional<double> { return c.p_bar; },
                               [](const Martingale& g) -> std::optional<double> { return g.p_init; },
                               [](const OrnsteinUhlenbeck& o) -> std::optional<double> {
                                 return o.p_bar;
                               },
                               [](const General& g) { return g.stationary; }},
                    m);
}

inline bool is_affine(const PriceModel& m) { return !std::holds_alternative<General>(m); }

// Mean-reversion speed of the affine state; zero for constant and martingale laws.
inline double mean_reversion(const PriceModel& m) {
  if (const auto* o = std::get_if<OrnsteinUhlenbeck>(&m)) return o->kappa;
  return 0.0;
}

// tau -> E[P_{t+tau} | P_t = p_t] for affine laws.
inline std::optional<ExpPoly> conditional_curve(const PriceModel& m, double p_t) {
  return std::visit(
      overloaded{[](const Constant& c) -> std::optional<ExpPoly> { return ExpPoly::constant(c.p_bar); },
                 [&](const Martingale&) -> std::optional<ExpPoly> { return ExpPoly::constant(p_t); },
                 [&](const OrnsteinUhlenbeck& o) -> std::optional<ExpPoly> {
                   return ExpPoly::constant(o.p_bar) + ExpPoly::exponential(p_t - o.p_bar, o.kappa);
                 },
                 [](const General&) -> std::optional<ExpPoly> { return std::nullopt; }},
      m);
}

// s -> E[P_s] for affine laws.
inline std::optional<ExpPoly> mean_curve(const PriceModel& m) { return conditional_curve(m, initial(m)); }

namespace detail {

// int_0^inf e^{-r u} g(u) du with |g| <= bound, truncated where the tail drops below tolerance.
template <class G>
double discounted_integral(G&& g, double r, double bound) {
  const double rel_tail = quadrature_tol * 1e-2;
  const double T = std::max(1.0 / r, std::log(1.0 / rel_tail) / r);
  double err = 0.0;
  const double scale = std::max(bound, 1e-300) / r;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double u) { return std::exp(-r * u) * g(u); }, 0.0, T, 30, quadrature_tol * 1e-2, &err);
  if (!(err <= quadrature_tol * scale))
    throw DomainError("discounted quadrature did not reach tolerance");
  return v;
}

}  // namespace detail

// int_t^inf e^{-r(s-t)} E[P_s | F_t] ds (conditional) or with E[P_s] (unconditional).
inline double discounted_kernel(const PriceModel& m, double t, double r, double p_t, Kernel mode) {
  if (!(r > 0.0)) throw DomainError("discounted_kernel needs r > 0");
  if (const auto* g = std::get_if<General>(&m)) {
    if (mode == Kernel::conditional)
      return detail::discounted_integral(
          [&](double u) { return g->conditional_mean(t, t + u, p_t); }, r, g->bound);
    return detail::discounted_integral(
        [&](double u) { return g->conditional_mean(0.0, t + u, g->p_init); }, r, g->bound);
  }
  if (mode == Kernel::conditional) return conditional_curve(m, p_t)->discounted_from(r, 0.0);
  return mean_curve(m)->discounted_from(r, t);
}

// Var[P_s] under the simulated path law.
inline double variance(const PriceModel& m, double s) {
  return std::visit(
      overloaded{[](const Constant&) { return 0.0; },
                 [&](const Martingale& g) { return g.p_init * g.p_init * std::expm1(g.vol * g.vol * s); },
                 [&](const OrnsteinUhlenbeck& o) {
                   if (o.kappa == 0.0) return o.vol * o.vol * s;
                   return o.vol * o.vol * (-std::expm1(-2.0 * o.kappa * s)) / (2.0 * o.kappa);
                 },
                 [&](const General& g) { return g.variance ? g.variance(s) : 0.0; }},
      m);
}

// int_0^inf e^{-r s} Var[P_s] ds; DomainError when the discounted second moment diverges.
inline double discounted_variance(const PriceModel& m, double r) {
  if (!(r > 0.0)) throw DomainError("discounted_variance needs r > 0");
  return std::visit(
      overloaded{[](const Constant&) { return 0.0; },
                 [&](const Martingale& g) {
                   const double v2 = g.vol * g.vol;
                   if (!(r > v2)) throw DomainError("price second moment is not discount-integrable");
                   return g.p_init * g.p_init * v2 / (r * (r - v2));
                 },
                 [&](const OrnsteinUhlenbeck& o) {
                   return o.vol * o.vol / (r * (r + 2.0 * o.kappa));
                 },
                 [&](const General& g) {
                   if (!g.variance) return 0.0;
                   double err = 0.0;
                   const double T = std::log(1e12) / r;
                   return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                       [&](double s) { return std::exp(-r * s) * g.variance(s); }, 0.0, T, 30, 1e-12,
                       &err);
                 }},
      m);
}

// Exact one-step transition P_{t+dt} given P_t and a standard normal draw.
inline double step(const PriceModel& m, double p, double dt, double z) {
  return std::visit(
      overloaded{[](const Constant& c) { return c.p_bar; },
                 [&](const Martingale& g) {
                   return p * std::exp(g.vol * std::sqrt(dt) * z - 0.5 * g.vol * g.vol * dt);
                 },
                 [&](const OrnsteinUhlenbeck& o) {
                   const double decay = std::exp(-o.kappa * dt);
                   const double var = (o.kappa == 0.0) ? dt : -std::expm1(-2.0 * o.kappa * dt) / (2.0 * o.kappa);
                   return o.p_bar + (p - o.p_bar) * decay + o.vol * std::sqrt(var) * z;
                 },
                 [](const General&) -> double {
                   throw DomainError("path simulation needs an affine price law");
                 }},
      m);
}

inline std::string name(const PriceModel& m) {
  return std::visit(overloaded{[](const Constant&) { return std::string("constant"); },
                               [](const Martingale&) { return std::string("martingale"); },
                               [](const OrnsteinUhlenbeck&) { return std::string("ou"); },
                               [](const General&) { return std::string("general"); }},
                    m);
}

}  // namespace price
}  // namespace gridmix
