#include <gtest/gtest.h>

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "gridmix/consumer.hpp"
#include "gridmix/firm.hpp"

using namespace gridmix;
namespace odeint = boost::numeric::odeint;

namespace {

ModelParams params() {
  auto p = reference_params(1.0, 1.0, 100.0);
  p.lambda = 10.0;
  p.x0 = 1000.0;
  p.q0 = 2000.0;
  return p;
}

template <std::size_t N, class F>
std::array<double, N> integrate(F f, std::array<double, N> y, double t0, double t1) {
  odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_dopri5<std::array<double, N>>>(1e-12, 1e-12),
                             [&](const std::array<double, N>& x, std::array<double, N>& dx, double t) { dx = f(t, x); }, y,
                             t0, t1, 1e-3);
  return y;
}

// Residual demand forecast with a transient: H(tau) = 30000 - 8000 e^{-0.3 tau} + 500 tau e^{-0.7 tau}.
ExpPoly forecast() {
  return ExpPoly::constant(30000.0) + ExpPoly::exponential(-8000.0, 0.3) + ExpPoly::term(500.0, 0.7, 1);
}

// Discounted cost of nu = nu*(q) + eps e^{-tau} against the forecast, net of the
// forecast-only term lambda H^2.
double firm_cost(const FirmPolicy& pol, double q0, double eps) {
  const auto& p = pol.params;
  const auto H = forecast();
  const auto HD = H.forward_discount(pol.rate);
  auto rhs = [&](double t, const std::array<double, 2>& v) {
    const double q = v[0];
    const double nu = firm::optimal_rate(pol, q, HD(t)) + eps * std::exp(-t);
    const double gap = H(t) - q;
    const double cost = p.h * nu + p.delta * nu * nu + p.lambda * (gap * gap - H(t) * H(t)) + p.pi * q;
    return std::array<double, 2>{nu, std::exp(-p.rho * t) * cost};
  };
  return integrate<2>(rhs, {q0, 0.0}, 0.0, 450.0)[1];
}

}  // namespace

TEST(Firm, PolicyFromGain) {
  const auto p = params();
  const auto pol = firm::make_policy(p);
  EXPECT_NEAR(pol.K_f * pol.K_f / p.delta + p.rho * pol.K_f, p.lambda, 1e-12 * p.lambda);
  EXPECT_NEAR(pol.rate, p.rho + pol.K_f / p.delta, 1e-15);
  EXPECT_NEAR(pol.constant_term, (p.pi + p.h * p.rho) / (2 * p.delta * pol.rate), 1e-12);
}

TEST(Firm, ValueMatchesClosedLoopCost) {
  const auto pol = firm::make_policy(params());
  for (double q0 : {0.0, 2000.0, 40000.0}) {
    const double ref = firm_cost(pol, q0, 0.0);
    EXPECT_NEAR(firm::value_given_forecast(pol, q0, forecast()), ref, 1e-8 * std::abs(ref)) << "q0=" << q0;
  }
}

// First-order condition by central differences, second order by curvature.
TEST(Firm, FeedbackIsOptimalAgainstPerturbations) {
  const auto pol = firm::make_policy(params());
  const double q0 = 2000.0, eps = 50.0;
  const double j0 = firm_cost(pol, q0, 0.0);
  const double jp = firm_cost(pol, q0, eps), jm = firm_cost(pol, q0, -eps);
  EXPECT_GT(jp, j0);
  EXPECT_GT(jm, j0);
  const double slope = (jp - jm) / (2 * eps);
  const double curvature = (jp - 2 * j0 + jm) / (eps * eps);
  EXPECT_LT(std::abs(slope) * eps, 1e-6 * (jp - j0));
  EXPECT_GT(curvature, 0.0);
}

TEST(Firm, MeanCurveMatchesOde) {
  const auto p = params();
  const auto pol = firm::make_policy(p);
  const auto cm = *consumer::mean_curve(consumer::make_policy(p, price::Constant{200.0}));
  const auto HD = (p.D - cm).forward_discount(pol.rate);
  const auto curve = firm::mean_curve(pol, cm);
  std::array<double, 1> y{p.q0};
  double t = 0.0;
  for (double t1 : {0.2, 1.0, 5.0, 40.0}) {
    y = integrate<1>([&](double s, const std::array<double, 1>& v) {
      return std::array<double, 1>{firm::optimal_rate(pol, v[0], HD(s))};
    }, y, t, t1);
    t = t1;
    EXPECT_NEAR(curve(t), y[0], 1e-8 * std::abs(y[0])) << "t=" << t;
  }
  const auto traj = firm::mean_trajectory(pol, cm, {0.0, 1.0});
  EXPECT_NEAR(traj[1].rate, curve.derivative()(1.0), 1e-8 * std::abs(traj[1].rate));
}

TEST(Firm, MeanConvergesToStationaryLevel) {
  const auto p = params();
  const auto cpol = consumer::make_policy(p, price::Constant{200.0});
  const auto cm = *consumer::mean_curve(cpol);
  const auto q = firm::mean_curve(firm::make_policy(p), cm);
  const double x_inf = consumer::stationary_level(p, cpol.gains, 200.0).x_inf;
  const auto st = firm::stationary_level(p, x_inf);
  EXPECT_NEAR(q(3000.0), st.q_inf, 1e-8 * std::abs(st.q_inf));
  EXPECT_NEAR(st.q_inf, p.D - x_inf - (p.pi + p.rho * p.h) / (2 * p.lambda), 1e-9);
}

TEST(Firm, StationaryValueAddsForecastTerms) {
  const auto p = params();
  const auto g = riccati::scalar_gains(p);
  const auto pol = firm::make_policy(p);
  const double pbar = 200.0, q = 5000.0;
  const double H = p.D - consumer::stationary_level(p, g, pbar).x_inf;
  const double expected =
      firm::value_given_forecast(pol, q, ExpPoly::constant(H)) + (p.lambda * H * H - pbar * H) / p.rho;
  EXPECT_NEAR(firm::stationary_value(p, g.K_f, g, pbar, q), expected, 1e-10 * std::abs(expected));
}

TEST(Firm, FunctionForecastMatchesExpPoly) {
  const auto pol = firm::make_policy(params());
  const auto H = forecast();
  const double t = 1.5;
  const auto shifted = H.shifted(t);
  const double a = firm::optimal_rate(pol, t, 3000.0, shifted);
  const double b = firm::optimal_rate(pol, t, 3000.0, std::function<double(double)>([&](double s) { return H(s); }), 4e4);
  EXPECT_NEAR(a, b, 1e-6 * std::abs(a));
}

TEST(Firm, NonIntegrableForecastThrows) {
  const auto pol = firm::make_policy(params());
  EXPECT_THROW(firm::optimal_rate(pol, 0.0, 0.0, ExpPoly::exponential(1.0, -2.0 * pol.rate)), DomainError);
  EXPECT_THROW(firm::optimal_rate(pol, 0.0, 0.0,
                                  std::function<double(double)>([&](double s) { return std::exp(2.0 * pol.rate * s); }),
                                  1.0),
               DomainError);
}

TEST(Firm, ZeroPenaltyIsDegenerate) {
  auto p = params();
  p.lambda = 0.0;
  EXPECT_THROW(firm::stationary_level(p, 100.0), DegenerateError);
}
