#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gridmix/errors.hpp"

namespace gridmix {

// Units: prices in EUR/MWh, capacities in MW, rates per year. Nothing is
// rescaled internally.
struct ModelParams {
  static constexpr double unset = std::numeric_limits<double>::quiet_NaN();

  double rho = unset;     // discount rate
  double sigma = unset;   // volatility of distributed capacity
  double b = unset;       // solar load factor
  double c = unset;       // distributed capacity cost, rho*c/b is EUR/MWh
  double gamma = unset;   // distributed adjustment cost
  double theta = unset;   // transmission cost
  double eta = unset;     // intermittency aversion
  double D = unset;       // demand
  double h = unset;       // centralised capacity cost, rho*h is EUR/MWh
  double delta = unset;   // centralised adjustment cost
  double pi = unset;      // carbon tax
  double lambda = unset;  // commitment penalty
  double x0 = 0.0;
  double q0 = 0.0;

  void set_annuity_distributed(double annuity) { c = annuity * b / rho; }
  void set_annuity_centralised(double annuity) { h = annuity / rho; }
};

struct DerivedCosts {
  double annuity_distributed;  // rho*c/b
  double annuity_centralised;  // rho*h
  double total_centralised;    // rho*h + pi
  double net_distributed;      // rho*c/b - theta
};

inline DerivedCosts derived_costs(const ModelParams& p) {
  const double ad = p.rho * p.c / p.b;
  const double ac = p.rho * p.h;
  return {ad, ac, ac + p.pi, ad - p.theta};
}

struct Violation {
  std::string field;
  std::string rule;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<std::string> warnings;

  bool ok() const { return violations.empty(); }

  std::string describe() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.field << ": violates " << v.rule << '\n';
    return os.str();
  }
};

inline ValidationReport validate(const ModelParams& p) {
  ValidationReport r;
  auto check = [&](bool holds, const char* field, const char* rule) {
    if (!holds) r.violations.push_back({field, rule});
  };
  // NaN fails every comparison, so unset fields are reported too.
  check(p.rho > p.sigma * p.sigma, "rho", "rho > sigma^2");
  check(p.sigma >= 0, "sigma", "sigma >= 0");
  check(p.gamma > 0, "gamma", "gamma > 0");
  check(p.delta > 0, "delta", "delta > 0");
  check(p.lambda >= 0, "lambda", "lambda >= 0");
  check(p.eta >= 0, "eta", "eta >= 0");
  check(p.b > 0, "b", "b > 0");
  check(p.D > 0, "D", "D > 0");
  check(p.theta >= 0, "theta", "theta >= 0");
  check(p.pi >= 0, "pi", "pi >= 0");
  check(p.c >= 0, "c", "c >= 0");
  check(p.h >= 0, "h", "h >= 0");
  check(std::isfinite(p.x0), "x0", "x0 finite");
  check(std::isfinite(p.q0), "q0", "q0 finite");
  if (r.ok() && p.rho - p.sigma * p.sigma < 1e-6)
    r.warnings.push_back("rho - sigma^2 < 1e-6: discounting barely dominates the volatility");
  return r;
}

inline void require_valid(const ModelParams& p) {
  const auto r = validate(p);
  if (!r.ok()) throw ValidationError(r.describe());
}

// Baseline market: 10%/year discounting, 0.3 volatility, 15% load factor,
// 130 EUR/MWh distributed annuity, 50 EUR/MWh transmission, 100 EUR/MWh
// centralised annuity, 50 GW demand. gamma, delta, pi vary by scenario.
inline ModelParams reference_params(double gamma = 1.0, double delta = 1.0, double pi = 100.0) {
  ModelParams p;
  p.rho = 0.1;
  p.sigma = 0.3;
  p.b = 0.15;
  p.theta = 50.0;
  p.eta = 876.0;
  p.D = 50000.0;
  p.lambda = 8.76e6;
  p.gamma = gamma;
  p.delta = delta;
  p.pi = pi;
  p.set_annuity_distributed(130.0);
  p.set_annuity_centralised(100.0);
  return p;
}

}  // namespace gridmix
