#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gridmix/consumer.hpp"
#include "gridmix/equilibrium.hpp"
#include "gridmix/errors.hpp"
#include "gridmix/firm.hpp"
#include "gridmix/parallel.hpp"
#include "gridmix/params.hpp"
#include "gridmix/planner.hpp"
#include "gridmix/price.hpp"
#include "gridmix/rng.hpp"

namespace gridmix {

enum class Scheme { euler_maruyama, split_rk4 };
enum class CostKind { consumer, firm, social };

struct SimConfig {
  std::size_t n_paths = 10000;
  double dt = 1.0 / 64.0;
  double horizon = 100.0;
  std::uint64_t seed = 1;
  // Rate in the tail bound e^{-rho T} L_T / tail_rate; unset means rho - sigma^2,
  // the slowest rate at which the discounted second moment can decay.
  std::optional<double> tail_rate;
  Scheme scheme = Scheme::euler_maruyama;
  // Feed the cross-path sample mean back into the controls instead of the exact mean.
  bool empirical_mean = false;
  std::size_t chunk = 256;  // fixed reduction blocks; results do not depend on thread count
  unsigned threads = worker_count();
};

// State z = (X, Q), controls u = (alpha, nu), dz = diag(b, 1) u dt + sigma X dW e_1.
// Controls are affine: u = offset(t) + Kdev (z - m(t)) + Kmean m(t) + price_coef (p - E[P_t]).
struct AffineSystem {
  ModelParams params;
  PriceModel price = price::Constant{0.0};
  int dim = 1;  // 1: X only
  Eigen::Matrix2d Kdev = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d Kmean = Eigen::Matrix2d::Zero();
  Eigen::Vector2d price_coef = Eigen::Vector2d::Zero();
  std::function<Eigen::Vector2d(double)> offset;
  std::function<Eigen::Vector2d(double)> mean;  // exact E[z_t]
  CostKind cost = CostKind::consumer;
  Eigen::Vector2d owned = Eigen::Vector2d(1.0, 0.0);  // controls chosen by the agent whose cost is measured
};

enum class Shape { constant, decaying, proportional };

// Adds eps_i phi_i(t, z) to control i: phi_i = 1, e^{-t}, or the state z_i.
struct Perturbation {
  Shape shape;
  Eigen::Vector2d eps;
};

struct SimPoint {
  double t;
  double mean_x;
  double var_x;
  double mean_q;
  double var_q;
  double cost_running;  // discounted cost accumulated on [0, t)
};

struct SimResult {
  std::vector<SimPoint> points;
  std::vector<double> path_costs;  // discounted running cost per path, variance penalty excluded
  double variance_term = 0.0;      // eta int e^{-rho t} Var[X_t] dt from sample variances
  double cost = 0.0;               // mean path cost + variance term
  double cost_se = 0.0;
  double negative_fraction = 0.0;  // paths with X < 0 at some grid time
  double tail_bound = 0.0;         // bound on the cost beyond the horizon
  double dt = 0.0;
};

struct ProbeRow {
  Shape shape;
  double eps;  // relative to the natural scale
  Eigen::Vector2d amplitude;
  double delta_cost;  // J(perturbed) - J(optimal), common random numbers
  double se;
  bool significant_improvement;  // delta_cost < -2 se
};

struct ProbeReport {
  double base_cost;
  double base_se;
  std::vector<ProbeRow> rows;

  bool optimal() const {
    for (const auto& r : rows)
      if (r.significant_improvement) return false;
    return true;
  }
};

struct ParetoCheck {
  double planner_cost;
  double planner_se;
  double decentralized_cost;
  double decentralized_se;
  double gap;  // decentralized - planner
  double gap_se;
};

namespace montecarlo {

inline constexpr double perturbation_decay = 1.0;  // per year
inline constexpr double em_stability_limit = 2.0;
inline constexpr double rk4_stability_limit = 2.785 * 2.0;  // two RK4 half-steps per step

inline std::string shape_name(Shape s) {
  switch (s) {
    case Shape::constant: return "constant";
    case Shape::decaying: return "decaying";
    case Shape::proportional: return "proportional";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Closed-loop systems

inline AffineSystem consumer_system(const ConsumerPolicy& pol) {
  const auto mc = consumer::mean_curve(pol);
  const auto pm = price::mean_curve(pol.price);
  if (!mc || !pm) throw DomainError("simulation needs an affine price law");
  const auto& p = pol.params;
  const double half = p.b / (2.0 * p.gamma);
  const ExpPoly slow = pm->forward_discount(pol.rate_slow);
  const double c0 = pol.constant_term;
  AffineSystem s;
  s.params = p;
  s.price = pol.price;
  s.dim = 1;
  s.Kdev(0, 0) = -pol.deviation_gain();
  s.Kmean(0, 0) = -pol.mean_gain();
  s.price_coef(0) = half / (pol.rate_fast + price::mean_reversion(pol.price));
  s.offset = [=](double t) { return Eigen::Vector2d(c0 + half * slow(t), 0.0); };
  s.mean = [m = *mc](double t) { return Eigen::Vector2d(m(t), 0.0); };
  s.cost = CostKind::consumer;
  return s;
}

// Consumer at its optimum and the firm best-responding with the consumer's
// conditional forecast, which is affine in (X_t - E[X_t], P_t - E[P_t]).
inline AffineSystem firm_system(const ConsumerPolicy& cpol, const FirmPolicy& fpol,
                                CostKind cost = CostKind::firm) {
  AffineSystem s = consumer_system(cpol);
  const auto& p = cpol.params;
  const ExpPoly mc = *consumer::mean_curve(cpol);
  const ExpPoly mq = firm::mean_curve(fpol, mc);
  const ExpPoly lmean = (p.D - mc).forward_discount(fpol.rate);
  const double R = fpol.rate;
  const double kK = cpol.deviation_decay();
  const double kappa = price::mean_reversion(cpol.price);
  const double ld = p.lambda / p.delta;
  s.dim = 2;
  s.Kdev(1, 0) = -ld / (R + kK);
  s.Kdev(1, 1) = -fpol.gain();
  s.Kmean(1, 1) = -fpol.gain();
  s.price_coef(1) = -ld * (p.b * p.b / (2.0 * p.gamma)) / ((cpol.rate_fast + kappa) * (R + kappa) * (R + kK));
  const auto consumer_offset = s.offset;
  const double c1 = fpol.constant_term;
  s.offset = [=](double t) {
    Eigen::Vector2d o = consumer_offset(t);
    o(1) = ld * lmean(t) - c1;
    return o;
  };
  s.mean = [=](double t) { return Eigen::Vector2d(mc(t), mq(t)); };
  s.cost = cost;
  s.owned = cost == CostKind::firm ? Eigen::Vector2d(0.0, 1.0) : Eigen::Vector2d(1.0, 1.0);
  return s;
}

inline AffineSystem planner_system(const PlannerSolution& sol) {
  const auto& p = sol.params;
  const auto& K = sol.sare.K;
  const auto& L = sol.sare.Lambda;
  AffineSystem s;
  s.params = p;
  s.dim = 2;
  const double bg = p.b / p.gamma;
  s.Kdev << -bg * K(0, 0), -bg * K(0, 1), -K(0, 1) / p.delta, -K(1, 1) / p.delta;
  s.Kmean << -bg * L(0, 0), -bg * L(0, 1), -L(0, 1) / p.delta, -L(1, 1) / p.delta;
  const Eigen::Vector2d off(sol.Theta(0) / p.b, sol.Theta(1));
  s.offset = [off](double) { return off; };
  s.mean = [sol](double t) { return planner::mean_at(sol, t); };
  s.cost = CostKind::social;
  s.owned = Eigen::Vector2d(1.0, 1.0);
  return s;
}

// ---------------------------------------------------------------------------

namespace detail {

inline double running_cost(const AffineSystem& s, const Eigen::Vector2d& z, const Eigen::Vector2d& u, double price) {
  const auto& p = s.params;
  const double x = z(0), q = z(1), a = u(0), v = u(1);
  switch (s.cost) {
    case CostKind::consumer:
      return p.c * a + p.gamma * a * a + (price + p.theta) * (p.D - x);
    case CostKind::firm: {
      const double gap = p.D - x - q;
      return p.h * v + p.delta * v * v + p.lambda * gap * gap - price * (p.D - x) + p.pi * q;
    }
    case CostKind::social: {
      const double gap = p.D - x - q;
      return p.c * a + p.gamma * a * a + p.h * v + p.delta * v * v + p.theta * (p.D - x) + p.pi * q +
             p.lambda * gap * gap;
    }
  }
  return 0.0;
}

inline bool penalises_variance(CostKind k) { return k != CostKind::firm; }

inline Eigen::Vector2d perturbation_value(const Perturbation& pert, double t, const Eigen::Vector2d& z) {
  switch (pert.shape) {
    case Shape::constant: return pert.eps;
    case Shape::decaying: return pert.eps * std::exp(-perturbation_decay * t);
    case Shape::proportional: return pert.eps.cwiseProduct(z);
  }
  return Eigen::Vector2d::Zero();
}

inline double spectral_radius(const Eigen::Matrix2d& A, int dim) {
  if (dim == 1) return std::abs(A(0, 0));
  return Eigen::EigenSolver<Eigen::Matrix2d>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

// Throws DomainError when dt exceeds the explicit scheme's stability limit for the closed-loop gains.
inline void check_stability(const AffineSystem& s, Scheme scheme, double dt) {
  const Eigen::Matrix2d G = Eigen::Vector2d(s.params.b, 1.0).asDiagonal();
  const double r = std::max(detail::spectral_radius(G * s.Kdev, s.dim), detail::spectral_radius(G * s.Kmean, s.dim));
  const double limit = scheme == Scheme::euler_maruyama ? em_stability_limit : rk4_stability_limit;
  if (r * dt > limit)
    throw DomainError("dt = " + std::to_string(dt) + " exceeds the stability limit " + std::to_string(limit / r) +
                      " for the closed-loop gains");
}

inline SimResult simulate(const AffineSystem& s, const SimConfig& cfg,
                          const std::optional<Perturbation>& pert = std::nullopt) {
  if (cfg.n_paths < 2) throw DomainError("simulation needs at least two paths");
  if (!(cfg.dt > 0.0) || !(cfg.horizon >= cfg.dt)) throw DomainError("simulation needs dt > 0 and horizon >= dt");
  if (!price::is_affine(s.price)) throw DomainError("simulation needs an affine price law");
  if (pert && s.dim == 1 && pert->eps(1) != 0.0) throw DomainError("second control is not active");
  const long n_steps = std::max(1L, std::lround(cfg.horizon / cfg.dt));
  const double dt = cfg.horizon / static_cast<double>(n_steps);
  check_stability(s, cfg.scheme, dt);

  const auto& p = s.params;
  const std::size_t n = cfg.n_paths;
  const std::size_t chunk = std::max<std::size_t>(cfg.chunk, 1);
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  const Eigen::Vector2d G(p.b, 1.0);
  const double sqdt = std::sqrt(dt);

  std::vector<double> x(n, p.x0), q(n, s.dim == 2 ? p.q0 : 0.0), pr(n, price::initial(s.price)), cost(n, 0.0);
  std::vector<char> negative(n, p.x0 < 0.0 ? 1 : 0);

  struct Partial {
    double dx = 0, dx2 = 0, dq = 0, dq2 = 0, cost = 0, tail = 0;
  };
  std::vector<Partial> parts(n_chunks);

  SimResult out;
  out.dt = dt;
  out.points.reserve(static_cast<std::size_t>(n_steps) + 1);
  const double nd = static_cast<double>(n);

  for (long k = 0; k <= n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Eigen::Vector2d m_ref = s.mean(t);

    // Moments, shifted by the exact mean to limit cancellation.
    parallel_for(
        n_chunks,
        [&](std::size_t c) {
          Partial a;
          for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
            const double ex = x[i] - m_ref(0), eq = q[i] - m_ref(1);
            a.dx += ex;
            a.dx2 += ex * ex;
            a.dq += eq;
            a.dq2 += eq * eq;
            a.cost += cost[i];
          }
          parts[c] = a;
        },
        cfg.threads);
    Partial sum;
    for (const auto& a : parts) {
      sum.dx += a.dx;
      sum.dx2 += a.dx2;
      sum.dq += a.dq;
      sum.dq2 += a.dq2;
      sum.cost += a.cost;
    }
    auto variance = [&](double s1, double s2) { return n > 1 ? std::max(0.0, (s2 - s1 * s1 / nd) / (nd - 1.0)) : 0.0; };
    const double mean_x = m_ref(0) + sum.dx / nd, var_x = variance(sum.dx, sum.dx2);
    const double mean_q = m_ref(1) + sum.dq / nd, var_q = variance(sum.dq, sum.dq2);
    out.points.push_back({t, mean_x, var_x, mean_q, var_q, sum.cost / nd + out.variance_term});
    const double disc = std::exp(-p.rho * t);
    const double eta_var = detail::penalises_variance(s.cost) ? p.eta * var_x : 0.0;

    const Eigen::Vector2d m_use = cfg.empirical_mean ? Eigen::Vector2d(mean_x, mean_q) : m_ref;
    // Exact mean, offset and price mean at t + j dt/4, j = 0..4, for the split scheme.
    std::array<Eigen::Vector2d, 5> m_node, off_node;
    std::array<double, 5> ep_node;
    for (int j = 0; j < 5; ++j) {
      const double tau = t + 0.25 * dt * j;
      m_node[j] = cfg.empirical_mean ? m_use : s.mean(tau);
      off_node[j] = s.offset(tau);
      ep_node[j] = price::mean(s.price, tau);
    }
    const bool last = k == n_steps;
    // Trapezoid weights: a left-point rule biases perturbation probes by O(dt).
    const double weight = (k == 0 || last) ? 0.5 * dt : dt;

    parallel_for(
        n_chunks,
        [&](std::size_t c) {
          double tail = 0.0;
          for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
            const double pi_ = pr[i];
            auto control = [&](double tau, const Eigen::Vector2d& z, const Eigen::Vector2d& m, double e,
                               const Eigen::Vector2d& o) {
              Eigen::Vector2d u = o + s.Kdev * (z - m) + s.Kmean * m + s.price_coef * (pi_ - e);
              if (pert) u += detail::perturbation_value(*pert, tau, z);
              if (s.dim == 1) u(1) = 0.0;
              return u;
            };
            Eigen::Vector2d z(x[i], q[i]);
            const Eigen::Vector2d u = control(t, z, m_use, ep_node[0], off_node[0]);
            const double ell = detail::running_cost(s, z, u, pi_);
            cost[i] += disc * ell * weight;
            if (last) {
              tail += std::abs(ell);
              continue;
            }
            const auto [w_x, w_p] = normal_pair(cfg.seed, i, static_cast<std::uint32_t>(k));
            if (cfg.scheme == Scheme::euler_maruyama) {
              const double noise = p.sigma * z(0) * sqdt * w_x;
              z += G.cwiseProduct(u) * dt;
              z(0) += noise;
            } else {
              // Strang splitting: RK4 drift over dt/2, exact multiplicative noise, RK4 drift over dt/2.
              auto drift = [&](int j, const Eigen::Vector2d& y) {
                return Eigen::Vector2d(
                    G.cwiseProduct(control(t + 0.25 * dt * j, y, m_node[j], ep_node[j], off_node[j])));
              };
              auto half_step = [&](int j, Eigen::Vector2d y) {
                const double h = 0.5 * dt;
                const Eigen::Vector2d k1 = drift(j, y);
                const Eigen::Vector2d k2 = drift(j + 1, y + 0.5 * h * k1);
                const Eigen::Vector2d k3 = drift(j + 1, y + 0.5 * h * k2);
                const Eigen::Vector2d k4 = drift(j + 2, y + h * k3);
                return Eigen::Vector2d(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
              };
              z = half_step(0, z);
              z(0) *= std::exp(p.sigma * sqdt * w_x - 0.5 * p.sigma * p.sigma * dt);
              z = half_step(2, z);
            }
            x[i] = z(0);
            if (s.dim == 2) q[i] = z(1);
            if (x[i] < 0.0) negative[i] = 1;
            pr[i] = price::step(s.price, pi_, dt, w_p);
          }
          parts[c].tail = tail;
        },
        cfg.threads);

    out.variance_term += disc * eta_var * weight;
    if (last) {
      double tail = 0.0;
      for (const auto& a : parts) tail += a.tail;
      const double rate = cfg.tail_rate.value_or(p.rho - p.sigma * p.sigma);
      const double level = tail / nd + eta_var;
      out.tail_bound = rate > 0.0 ? disc * level / rate : std::numeric_limits<double>::infinity();
    }
  }

  double s1 = 0.0;
  for (double c : cost) s1 += c;
  const double mean_cost = s1 / nd;
  double s2 = 0.0;
  for (double c : cost) s2 += (c - mean_cost) * (c - mean_cost);
  out.cost = mean_cost + out.variance_term;
  out.cost_se = std::sqrt(s2 / (nd - 1.0) / nd);
  std::size_t neg = 0;
  for (char f : negative) neg += f != 0;
  out.negative_fraction = static_cast<double>(neg) / nd;
  out.path_costs = std::move(cost);
  return out;
}

inline SimResult simulate_consumer(const ConsumerPolicy& pol, const SimConfig& cfg) {
  return simulate(consumer_system(pol), cfg);
}

inline SimResult simulate_firm(const ConsumerPolicy& cpol, const FirmPolicy& fpol, const SimConfig& cfg) {
  return simulate(firm_system(cpol, fpol), cfg);
}

inline SimResult simulate_planner(const PlannerSolution& sol, const SimConfig& cfg) {
  return simulate(planner_system(sol), cfg);
}

// Mean and standard error of J(b) - J(a) for two runs on common random numbers.
inline std::pair<double, double> paired_difference(const SimResult& a, const SimResult& b) {
  const std::size_t n = a.path_costs.size();
  if (n != b.path_costs.size() || n == 0) throw DomainError("paired difference needs runs of equal size");
  const double nd = static_cast<double>(n);
  double s1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) s1 += b.path_costs[i] - a.path_costs[i];
  const double mean = s1 / nd;
  double s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = b.path_costs[i] - a.path_costs[i] - mean;
    s2 += d * d;
  }
  const double se = n > 1 ? std::sqrt(s2 / (nd - 1.0) / nd) : 0.0;
  return {mean + b.variance_term - a.variance_term, se};
}

inline constexpr std::array<double, 4> probe_levels{-1e-1, -1e-2, 1e-2, 1e-1};

// Natural scale of each active control: the largest |E[u_t]| on the grid, divided
// by the largest |E[z_t]| for the proportional shape.
inline std::pair<Eigen::Vector2d, Eigen::Vector2d> natural_scales(const AffineSystem& s, const SimConfig& cfg) {
  Eigen::Vector2d su = Eigen::Vector2d::Zero(), sz = Eigen::Vector2d::Zero();
  const long n_steps = std::max(1L, std::lround(cfg.horizon / cfg.dt));
  for (long k = 0; k <= n_steps; ++k) {
    const double t = cfg.horizon * static_cast<double>(k) / static_cast<double>(n_steps);
    const Eigen::Vector2d m = s.mean(t);
    const Eigen::Vector2d u = s.offset(t) + s.Kmean * m;
    su = su.cwiseMax(u.cwiseAbs());
    sz = sz.cwiseMax(m.cwiseAbs());
  }
  for (int i = 0; i < 2; ++i) {
    if (!(su(i) > 0.0)) su(i) = 1.0;
    if (!(sz(i) > 0.0)) sz(i) = 1.0;
  }
  return {su, su.cwiseQuotient(sz)};
}

inline ProbeReport optimality_probe(const AffineSystem& s, const SimConfig& cfg,
                                   const std::vector<std::pair<Perturbation, double>>& perturbations) {
  const SimResult base = simulate(s, cfg);
  ProbeReport rep{base.cost, base.cost_se, {}};
  for (const auto& [pert, level] : perturbations) {
    const SimResult r = simulate(s, cfg, pert);
    const auto [d, se] = paired_difference(base, r);
    rep.rows.push_back({pert.shape, level, pert.eps, d, se, d < -2.0 * se});
  }
  return rep;
}

// Three shapes times the four probe levels, applied jointly to the controls the agent owns.
inline std::vector<std::pair<Perturbation, double>> standard_perturbations(const AffineSystem& s,
                                                                           const SimConfig& cfg) {
  const auto [su, sp] = natural_scales(s, cfg);
  std::vector<std::pair<Perturbation, double>> out;
  for (Shape shape : {Shape::constant, Shape::decaying, Shape::proportional}) {
    const Eigen::Vector2d scale = (shape == Shape::proportional ? sp : su).cwiseProduct(s.owned);
    for (double e : probe_levels) out.push_back({Perturbation{shape, e * scale}, e});
  }
  return out;
}

inline ProbeReport optimality_probe(const AffineSystem& s, const SimConfig& cfg) {
  return optimality_probe(s, cfg, standard_perturbations(s, cfg));
}

// Social cost of the planner against the decentralised pair under the Pareto price,
// both on common random numbers.
inline ParetoCheck pareto_check(const ModelParams& p, const SimConfig& cfg) {
  const auto sol = planner::solve(p);
  const auto gains = riccati::scalar_gains(p);
  const double P_star = equilibrium::pareto_price(p, gains.K_c, sol.sare.K(0, 0)).P_star;
  const auto cpol = consumer::make_policy(p, price::Constant{P_star});
  const auto fpol = firm::make_policy(p);
  const SimResult a = simulate(planner_system(sol), cfg);
  const SimResult b = simulate(firm_system(cpol, fpol, CostKind::social), cfg);
  const auto [gap, se] = paired_difference(a, b);
  return {a.cost, a.cost_se, b.cost, b.cost_se, gap, se};
}

}  // namespace montecarlo
}  // namespace gridmix
