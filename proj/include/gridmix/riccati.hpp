#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gridmix/errors.hpp"
#include "gridmix/ode.hpp"
#include "gridmix/params.hpp"

namespace gridmix {

struct ScalarGains {
  double K_c = 0.0;
  double Lambda_c = 0.0;
  double K_f = 0.0;
};

struct SareSolution {
  Eigen::Matrix2d K = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d Lambda = Eigen::Matrix2d::Zero();
  double residual_K = 0.0;       // relative max-norm over the three K equations
  double residual_Lambda = 0.0;  // same for the Lambda equations
  long iterations = 0;           // accepted + rejected RK steps plus Newton steps
};

struct SareOptions {
  double tol = 1e-10;         // final relative residual
  double handoff = 1e-6;      // relative derivative norm at which the flow hands over to Newton
  long max_steps = 1000000;   // RK steps per system
  double rk_rtol = 1e-9;
  bool polish = true;         // without polish the flow itself must reach tol
};

namespace riccati {

// Nonnegative root of a x^2 + b x - c = 0 with a > 0, c >= 0, free of cancellation.
inline double positive_root(double a, double b, double c) {
  const double disc = std::sqrt(b * b + 4.0 * a * c);
  if (b >= 0.0) return (c == 0.0) ? 0.0 : 2.0 * c / (b + disc);
  return (-b + disc) / (2.0 * a);
}

struct ConsumerGains {
  double K_c;
  double Lambda_c;
};

// b^2 K^2/gamma + (rho - sigma^2) K - eta = 0 and b^2 L^2/gamma + rho L - sigma^2 K = 0.
inline ConsumerGains consumer_gains(const ModelParams& p) {
  const double a = p.b * p.b / p.gamma;
  const double s2 = p.sigma * p.sigma;
  const double K = positive_root(a, p.rho - s2, p.eta);
  const double L = positive_root(a, p.rho, s2 * K);
  return {K, L};
}

// K^2/delta + rho K - lambda = 0
inline double firm_gain(const ModelParams& p) { return positive_root(1.0 / p.delta, p.rho, p.lambda); }

inline ScalarGains scalar_gains(const ModelParams& p) {
  const auto cg = consumer_gains(p);
  return {cg.K_c, cg.Lambda_c, firm_gain(p)};
}

// Relative residuals of the scalar quadratics, each |lhs| / (sum of |terms|).
inline double consumer_k_residual(const ModelParams& p, double K) {
  const double a = p.b * p.b / p.gamma;
  const double s2 = p.sigma * p.sigma;
  const double r = a * K * K + (p.rho - s2) * K - p.eta;
  const double scale = a * K * K + std::abs(p.rho - s2) * K + p.eta;
  return scale > 0 ? std::abs(r) / scale : std::abs(r);
}
inline double consumer_lambda_residual(const ModelParams& p, double K, double L) {
  const double a = p.b * p.b / p.gamma;
  const double s2K = p.sigma * p.sigma * K;
  const double r = a * L * L + p.rho * L - s2K;
  const double scale = a * L * L + p.rho * L + s2K;
  return scale > 0 ? std::abs(r) / scale : std::abs(r);
}
inline double firm_residual(const ModelParams& p, double Kf) {
  const double r = Kf * Kf / p.delta + p.rho * Kf - p.lambda;
  const double scale = Kf * Kf / p.delta + p.rho * Kf + p.lambda;
  return scale > 0 ? std::abs(r) / scale : std::abs(r);
}

// Coefficient matrices of the planner's systems:
//   K:      K N^-1 K + rho K - S K S - Q            = 0
//   Lambda: L N^-1 L + rho L - (S K S + Q + Qtilde) = 0
struct SareSystem {
  double rho;
  Eigen::Matrix2d Ninv;  // diag(b^2/gamma, 1/delta)
  Eigen::Matrix2d S;     // diag(sigma, 0)
  Eigen::Matrix2d Q;     // [[lambda+eta, lambda], [lambda, lambda]]
  Eigen::Matrix2d Qtilde;  // diag(-eta, 0)
};

inline SareSystem sare_system(const ModelParams& p) {
  SareSystem s;
  s.rho = p.rho;
  s.Ninv << p.b * p.b / p.gamma, 0.0, 0.0, 1.0 / p.delta;
  s.S << p.sigma, 0.0, 0.0, 0.0;
  s.Q << p.lambda + p.eta, p.lambda, p.lambda, p.lambda;
  s.Qtilde << -p.eta, 0.0, 0.0, 0.0;
  return s;
}

namespace detail {

inline Eigen::Vector3d pack(const Eigen::Matrix2d& m) { return {m(0, 0), m(0, 1), m(1, 1)}; }
inline Eigen::Matrix2d unpack(const Eigen::Vector3d& v) {
  Eigen::Matrix2d m;
  m << v(0), v(1), v(1), v(2);
  return m;
}

// Flow in time-to-go: dX/dtau = -rho X + lin(X) + C - X N^-1 X, where lin is
// X -> S X S for the K system and zero for the Lambda system.
struct Flow {
  const SareSystem* sys;
  bool with_sxs;
  Eigen::Matrix2d source;

  Eigen::Matrix2d rhs(const Eigen::Matrix2d& X) const {
    Eigen::Matrix2d r = -sys->rho * X + source - X * sys->Ninv * X;
    if (with_sxs) r += sys->S * X * sys->S;
    return r;
  }

  // Sum of absolute term magnitudes, entrywise; denominator of relative residuals.
  Eigen::Matrix2d scale(const Eigen::Matrix2d& X) const {
    const Eigen::Matrix2d A = X.cwiseAbs();
    Eigen::Matrix2d s = sys->rho * A + source.cwiseAbs() + A * sys->Ninv.cwiseAbs() * A;
    if (with_sxs) s += sys->S.cwiseAbs() * A * sys->S.cwiseAbs();
    return s;
  }

  double relative_residual(const Eigen::Matrix2d& X) const {
    const Eigen::Matrix2d r = rhs(X).cwiseAbs();
    const Eigen::Matrix2d s = scale(X);
    double m = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) m = std::max(m, s(i, j) > 0 ? r(i, j) / s(i, j) : r(i, j));
    return m;
  }

  // Frechet derivative of rhs at X applied to E.
  Eigen::Matrix2d derivative(const Eigen::Matrix2d& X, const Eigen::Matrix2d& E) const {
    Eigen::Matrix2d d = -sys->rho * E - E * sys->Ninv * X - X * sys->Ninv * E;
    if (with_sxs) d += sys->S * E * sys->S;
    return d;
  }

  Eigen::Matrix3d jacobian(const Eigen::Matrix2d& X) const {
    Eigen::Matrix3d J;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d e = Eigen::Vector3d::Zero();
      e(k) = 1.0;
      J.col(k) = pack(derivative(X, unpack(e)));
    }
    return J;
  }
};

struct FlowResult {
  Eigen::Matrix2d X;
  long steps;
};

inline FlowResult run_flow(const Flow& flow, const Eigen::Matrix2d& seed, double stop_tol,
                           const SareOptions& opt, const char* name) {
  const double qmax = flow.source.cwiseAbs().maxCoeff();
  const double nmax = flow.sys->Ninv.cwiseAbs().maxCoeff();
  // Natural magnitude of the solution and the fastest rate of the flow.
  const double x_scale = std::sqrt(qmax / std::max(nmax, 1e-300)) + 1e-300;
  const double rate = flow.sys->rho + std::sqrt(qmax * nmax) + 1e-300;
  const double atol = opt.rk_rtol * 1e-6 * x_scale;
  auto f = [&](double, const Eigen::Vector3d& v) -> Eigen::Vector3d {
    return pack(flow.rhs(unpack(v)));
  };
  auto stop = [&](double, const Eigen::Vector3d& v, const Eigen::Vector3d& dv) {
    const Eigen::Matrix2d s = flow.scale(unpack(v));
    for (int k = 0; k < 3; ++k) {
      const double sc = (k == 0) ? s(0, 0) : (k == 1 ? s(0, 1) : s(1, 1));
      if (std::abs(dv(k)) > stop_tol * sc) return false;
    }
    return true;
  };
  const auto res = integrate_dopri(f, pack(seed), 0.0, std::numeric_limits<double>::infinity(),
                                   1e-3 / rate, opt.rk_rtol, atol, opt.max_steps, stop);
  if (!res.stopped)
    throw NonConvergence(std::string("Riccati flow for ") + name + " did not settle within " +
                             std::to_string(opt.max_steps) + " steps",
                         res.steps);
  return {unpack(res.y), res.steps};
}

// Damped Newton on the algebraic system; returns the number of iterations.
// Backtracking matters when the slowest mode of the flow is ~rho while the
// curvature is ~N^-1: full steps then overshoot from the hand-off point.
inline long newton_polish(const Flow& flow, Eigen::Matrix2d& X) {
  double best = flow.relative_residual(X);
  long it = 0;
  for (; it < 200 && best > 1e-15; ++it) {
    const Eigen::Vector3d step = flow.jacobian(X).partialPivLu().solve(-pack(flow.rhs(X)));
    bool improved = false;
    for (double damp = 1.0; damp > 1e-6; damp *= 0.5) {
      const Eigen::Matrix2d next = X + damp * unpack(step);
      const double r = flow.relative_residual(next);
      if (r < best) {
        X = next;
        best = r;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return it;
}

// The limit of the flow is its attracting fixed point: the linearisation must be stable.
inline bool attracting(const Flow& flow, const Eigen::Matrix2d& X) {
  const Eigen::Matrix3d J = flow.jacobian(X);
  const Eigen::EigenSolver<Eigen::Matrix3d> es(J, false);
  return (es.eigenvalues().real().array() < 0.0).all();
}

inline void require_positive_definite(const Eigen::Matrix2d& X, const char* name) {
  if (!(X(0, 0) > 0.0) || !(X.determinant() > 0.0))
    throw NotPositiveDefinite(std::string(name) + " has a nonpositive leading minor");
}

inline Eigen::Matrix2d settle(const Flow& flow, const Eigen::Matrix2d& seed, const SareOptions& opt,
                              const char* name, long& steps) {
  const double stop_tol = opt.polish ? std::max(opt.tol, opt.handoff) : opt.tol;
  auto fr = run_flow(flow, seed, stop_tol, opt, name);
  steps += fr.steps;
  if (opt.polish) {
    steps += newton_polish(flow, fr.X);
    if (!attracting(flow, fr.X))
      throw NonConvergence(std::string("Newton polish for ") + name + " left the flow's basin",
                           steps);
  }
  const double r = flow.relative_residual(fr.X);
  if (!(r <= opt.tol))
    throw NonConvergence(std::string(name) + " residual " + std::to_string(r) + " above tolerance",
                         steps);
  return fr.X;
}

}  // namespace detail

inline detail::Flow k_flow(const SareSystem& sys) { return {&sys, true, sys.Q}; }
inline detail::Flow lambda_flow(const SareSystem& sys, const Eigen::Matrix2d& K) {
  return {&sys, false, sys.S * K * sys.S + sys.Q + sys.Qtilde};
}

// Stabilising solutions of both systems, reached as the infinite-horizon limit
// of the finite-horizon Riccati flow started from the given seeds.
inline SareSolution solve_sare_from(const ModelParams& p, const Eigen::Matrix2d& K_seed,
                                    const Eigen::Matrix2d& Lambda_seed, const SareOptions& opt = {}) {
  require_valid(p);
  if (!(p.lambda > 0.0))
    throw DegenerateError("planner systems need a positive commitment penalty lambda");
  const SareSystem sys = sare_system(p);
  SareSolution sol;
  const auto kf = k_flow(sys);
  sol.K = detail::settle(kf, K_seed, opt, "K", sol.iterations);
  detail::require_positive_definite(sol.K, "K");
  const auto lf = lambda_flow(sys, sol.K);
  sol.Lambda = detail::settle(lf, Lambda_seed, opt, "Lambda", sol.iterations);
  detail::require_positive_definite(sol.Lambda, "Lambda");
  sol.residual_K = kf.relative_residual(sol.K);
  sol.residual_Lambda = lf.relative_residual(sol.Lambda);
  return sol;
}

inline SareSolution solve_sare(const ModelParams& p, const SareOptions& opt = {}) {
  return solve_sare_from(p, Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero(), opt);
}

// The six scalar equations in the orientation X N^-1 X + rho X - source(X) = 0,
// ordered (K11, K12, K22, Lambda11, Lambda12, Lambda22).
inline Eigen::Matrix<double, 6, 1> sare_equations(const ModelParams& p, const Eigen::Matrix2d& K,
                                                  const Eigen::Matrix2d& Lambda) {
  const SareSystem sys = sare_system(p);
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = -detail::pack(k_flow(sys).rhs(K));
  out.tail<3>() = -detail::pack(lambda_flow(sys, K).rhs(Lambda));
  return out;
}

}  // namespace riccati
}  // namespace gridmix
