#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gridmix/consumer.hpp"
#include "gridmix/errors.hpp"
#include "gridmix/firm.hpp"
#include "gridmix/parallel.hpp"
#include "gridmix/params.hpp"
#include "gridmix/planner.hpp"
#include "gridmix/riccati.hpp"

namespace gridmix {

struct ParetoPrice {
  double P_star;
  bool admissible;  // net distributed annuity <= total centralised annuity
};

struct StackelbergPrice {
  double P_F;        // firm's price target at initial centralised capacity q
  double xi;         // weight, always > 2
  double P_diamond;  // (1 - 1/xi) P_D + P_F / xi
  bool admissible;   // P_F <= P_D and P_diamond > 0
};

struct Presets {
  double P_F0;
  double P_diamond_0;
  double P_F_tildeD;        // h = 0, q = D - pi/(2 lambda)
  double P_diamond_tildeD;
};

struct Verdict {
  std::string name;
  bool holds;
  double lhs;
  double rhs;
};

struct EquilibriumReport {
  PriceBounds bounds;
  ScalarGains gains;
  double K11;
  ParetoPrice pareto;
  StackelbergPrice stackelberg;  // at q = q0
  Presets presets;
  StationaryOutcome planner_outcome;
  StationaryOutcome pareto_outcome;
  StationaryOutcome stackelberg_outcome;
  std::vector<Verdict> ordering;
};

namespace equilibrium {

inline ParetoPrice pareto_price(const ModelParams& p, double K_c, double K11) {
  const auto d = derived_costs(p);
  const double w = K_c / K11;
  return {(1.0 - w) * d.net_distributed + w * d.total_centralised, d.net_distributed <= d.total_centralised};
}

// Relative gap between the consumer's stationary level at P_star and the planner's.
inline double pareto_consistency(const ModelParams& p, double P_star, const ScalarGains& g, double K11) {
  const double xc = consumer::stationary_level(p, g, P_star).x_inf;
  const double xp = planner::stationary_mix(p, K11).x_inf;
  const double scale = std::max({std::abs(xc), std::abs(xp), 1e-300});
  return (xc == xp) ? 0.0 : std::abs(xc - xp) / scale;
}

inline double pareto_consistency(const ModelParams& p, double P_star) {
  return pareto_consistency(p, P_star, riccati::scalar_gains(p), riccati::solve_sare(p).K(0, 0));
}

inline StackelbergPrice stackelberg_price(const ModelParams& p, const ScalarGains& g, double q) {
  const double s2K = p.sigma * p.sigma * g.K_c;
  if (!(s2K > 0.0)) throw DegenerateError("Stackelberg price needs sigma^2 K_c > 0");
  const double rd = p.rho * p.delta + g.K_f;
  const double ld = p.lambda * p.delta;
  const double P_F = (ld / rd) * ((p.rho * p.h + p.pi) / rd - 2.0 * p.rho * q);
  const double xi = 2.0 + (p.lambda / s2K) * (1.0 - ld / (rd * rd));
  const double P_D = consumer::price_bounds(p, g).P_D;
  const double Pd = (1.0 - 1.0 / xi) * P_D + P_F / xi;
  return {P_F, xi, Pd, P_F <= P_D && Pd > 0.0};
}

// xi through the firm-gain identity (rho delta + K_f)^2 - lambda delta = rho delta (rho delta + K_f).
inline double xi_via_identity(const ModelParams& p, const ScalarGains& g) {
  const double rd = p.rho * p.delta + g.K_f;
  return 2.0 + (p.lambda / (p.sigma * p.sigma * g.K_c)) * p.rho * p.delta * rd / (rd * rd);
}

inline Presets preset_prices(const ModelParams& p, const ScalarGains& g) {
  Presets out{};
  const auto s0 = stackelberg_price(p, g, 0.0);
  out.P_F0 = s0.P_F;
  out.P_diamond_0 = s0.P_diamond;
  ModelParams existing = p;
  existing.h = 0.0;
  // P_F does not depend on q when lambda = 0.
  const double q = (p.lambda > 0.0) ? p.D - p.pi / (2.0 * p.lambda) : p.D;
  const auto sd = stackelberg_price(existing, g, q);
  out.P_F_tildeD = sd.P_F;
  out.P_diamond_tildeD = sd.P_diamond;
  return out;
}

inline std::vector<Verdict> ordering_report(const ModelParams& p, const ScalarGains& g, double K11) {
  const auto b = consumer::price_bounds(p, g);
  const double tc = derived_costs(p).total_centralised;
  const auto par = pareto_price(p, g.K_c, K11);
  const auto pre = preset_prices(p, g);
  return {
      {"P_floor <= P*", b.P_floor <= par.P_star, b.P_floor, par.P_star},
      {"P* <= rho h + pi", par.P_star <= tc, par.P_star, tc},
      {"P_F0 <= rho h + pi", pre.P_F0 <= tc, pre.P_F0, tc},
      {"rho h + pi <= P_D", tc <= b.P_D, tc, b.P_D},
      {"P* <= P_diamond_0", par.P_star <= pre.P_diamond_0, par.P_star, pre.P_diamond_0},
  };
}

inline std::vector<Verdict> ordering_report(const ModelParams& p) {
  return ordering_report(p, riccati::scalar_gains(p), riccati::solve_sare(p).K(0, 0));
}

inline EquilibriumReport report(const ModelParams& p, const SareOptions& opt = {}) {
  EquilibriumReport r;
  r.gains = riccati::scalar_gains(p);
  r.bounds = consumer::price_bounds(p, r.gains);
  r.K11 = riccati::solve_sare(p, opt).K(0, 0);
  r.pareto = pareto_price(p, r.gains.K_c, r.K11);
  r.stackelberg = stackelberg_price(p, r.gains, p.q0);
  r.presets = preset_prices(p, r.gains);
  r.planner_outcome = planner::stationary_mix(p, r.K11);
  r.pareto_outcome = consumer::stationary_level(p, r.gains, r.pareto.P_star);
  r.stackelberg_outcome = consumer::stationary_level(p, r.gains, r.stackelberg.P_diamond);
  r.ordering = ordering_report(p, r.gains, r.K11);
  return r;
}

// gamma such that P_D(gamma) = target, by bisection in log(gamma) on (1e-15, 1e3).
inline double calibrate_gamma(const ModelParams& p, double target_P_D) {
  auto pd = [&](double log_gamma) {
    ModelParams q = p;
    q.gamma = std::exp(log_gamma);
    return consumer::price_bounds(q, riccati::scalar_gains(q)).P_D;
  };
  const double floor = derived_costs(p).net_distributed;
  if (!(target_P_D > floor)) throw CalibrationError("target P_D must exceed P_floor");
  double lo = std::log(1e-15), hi = std::log(1e3);
  const double f_lo = pd(lo) - target_P_D;
  const double f_hi = pd(hi) - target_P_D;
  if (!(f_lo <= 0.0 && f_hi >= 0.0))
    throw CalibrationError("target P_D is not reachable for gamma in (1e-15, 1e3)");
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pd(mid) < target_P_D)
      lo = mid;
    else
      hi = mid;
  }
  const double mid = 0.5 * (lo + hi);
  if (!(std::abs(pd(mid) - target_P_D) <= 1e-6))
    throw CalibrationError("bisection stalled before reaching |P_D - target| <= 1e-6");
  return std::exp(mid);
}

// ---------------------------------------------------------------------------
// Scenario battery: pi in {0, 100} x delta in {1, 1e-2}. Left cells start
// from an empty system; right cells from an all-centralised system (h = 0).

struct BatteryCell {
  double price;
  double x_inf;  // MW
  bool admissible;
};

struct BatteryRow {
  double pi;
  double delta;
  double K11;
  BatteryCell pareto;                // P*
  BatteryCell stackelberg_empty;     // P_diamond_0
  BatteryCell pareto_existing;       // P* with h = 0
  BatteryCell stackelberg_existing;  // P_diamond at h = 0, q = D - pi/(2 lambda)
};

struct Battery {
  ModelParams base;
  PriceBounds bounds;
  std::vector<BatteryRow> rows;
};

inline Battery scenario_battery(ModelParams base, std::optional<double> calibrate_pd = std::nullopt,
                                const SareOptions& opt = {}) {
  if (calibrate_pd) base.gamma = calibrate_gamma(base, *calibrate_pd);
  Battery out;
  out.base = base;
  out.bounds = consumer::price_bounds(base, riccati::scalar_gains(base));
  const std::array<std::pair<double, double>, 4> cells{{{0.0, 1.0}, {0.0, 1e-2}, {100.0, 1.0}, {100.0, 1e-2}}};
  out.rows.resize(cells.size());
  parallel_for(cells.size(), [&](std::size_t k) {
    ModelParams p = base;
    p.pi = cells[k].first;
    p.delta = cells[k].second;
    p.x0 = 0.0;
    p.q0 = 0.0;
    ModelParams existing = p;
    existing.h = 0.0;
    existing.q0 = p.D;
    const auto g = riccati::scalar_gains(p);
    const double K11 = riccati::solve_sare(p, opt).K(0, 0);
    auto cell = [&](const ModelParams& q, double price, bool admissible) {
      const auto o = consumer::stationary_level(q, g, price);
      return BatteryCell{price, o.x_inf, admissible};
    };
    BatteryRow row{p.pi, p.delta, K11, {}, {}, {}, {}};
    const auto par = pareto_price(p, g.K_c, K11);
    row.pareto = cell(p, par.P_star, par.admissible);
    const auto s0 = stackelberg_price(p, g, 0.0);
    row.stackelberg_empty = cell(p, s0.P_diamond, s0.admissible);
    const auto par_e = pareto_price(existing, g.K_c, K11);
    row.pareto_existing = cell(existing, par_e.P_star, par_e.admissible);
    const double q = p.D - p.pi / (2.0 * p.lambda);
    const auto sd = stackelberg_price(existing, g, q);
    row.stackelberg_existing = cell(existing, sd.P_diamond, sd.admissible);
    out.rows[k] = row;
  });
  return out;
}

}  // namespace equilibrium
}  // namespace gridmix
