#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gridmix/equilibrium.hpp"
#include "support.hpp"

using namespace gridmix;

namespace {

constexpr double calibrated_gamma = 1.2938866836e-8;

// Price minimising the firm's stationary cost, by exhaustive search on a 0.01 grid.
double stackelberg_grid(const ModelParams& p, double q) {
  const auto g = riccati::scalar_gains(p);
  const auto b = consumer::price_bounds(p, g);
  double best = b.P_floor, best_v = INFINITY;
  for (double P = b.P_floor; P <= b.P_D; P += 0.01) {
    const double v = firm::stationary_value(p, g.K_f, g, P, q);
    if (v < best_v) {
      best_v = v;
      best = P;
    }
  }
  return best;
}

}  // namespace

TEST(Pareto, PriceIsKcWeightedMix) {
  const auto p = reference_params(1.0, 1.0, 100.0);
  const auto d = derived_costs(p);
  const auto par = equilibrium::pareto_price(p, 0.25, 1.0);
  EXPECT_DOUBLE_EQ(par.P_star, 0.75 * d.net_distributed + 0.25 * d.total_centralised);
  EXPECT_TRUE(par.admissible);
  auto q = p;
  q.h = 0.0;
  q.pi = 0.0;
  EXPECT_FALSE(equilibrium::pareto_price(q, 0.25, 1.0).admissible);
}

// At P* the consumer's stationary level coincides with the planner's.
TEST(Pareto, ConsumerReproducesPlannerMix) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    const auto p = testing_support::random_params(rng);
    const auto g = riccati::scalar_gains(p);
    const double K11 = riccati::solve_sare(p).K(0, 0);
    EXPECT_GT(K11, g.K_c);
    const auto par = equilibrium::pareto_price(p, g.K_c, K11);
    EXPECT_LE(equilibrium::pareto_consistency(p, par.P_star, g, K11), 1e-9) << "draw " << i;
  }
}

TEST(Stackelberg, ClosedFormMatchesGridSearch) {
  int checked = 0;
  for (double delta : {1.0, 1e-2}) {
    for (double pi : {0.0, 100.0}) {
      auto p = reference_params(calibrated_gamma, delta, pi);
      p.lambda = 1e4;
      const auto g = riccati::scalar_gains(p);
      for (double q : {0.0, 20000.0}) {
        const auto s = equilibrium::stackelberg_price(p, g, q);
        if (!s.admissible) continue;
        EXPECT_NEAR(s.P_diamond, stackelberg_grid(p, q), 0.01) << delta << " " << pi << " " << q;
        ++checked;
      }
    }
  }
  EXPECT_GE(checked, 6);
}

TEST(Stackelberg, WeightIdentityAndBounds) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 50; ++i) {
    const auto p = testing_support::random_params(rng);
    const auto g = riccati::scalar_gains(p);
    const auto s = equilibrium::stackelberg_price(p, g, p.q0);
    EXPECT_GT(s.xi, 2.0);
    EXPECT_NEAR(s.xi, equilibrium::xi_via_identity(p, g), 1e-9 * s.xi);
  }
}

TEST(Stackelberg, NoCommitmentHalvesTheDemandPrice) {
  auto p = reference_params(calibrated_gamma, 1.0, 100.0);
  p.lambda = 0.0;
  const auto g = riccati::scalar_gains(p);
  const auto s = equilibrium::stackelberg_price(p, g, 1000.0);
  EXPECT_EQ(s.xi, 2.0);
  EXPECT_EQ(s.P_diamond, consumer::price_bounds(p, g).P_D / 2.0);
}

TEST(Stackelberg, ZeroVolatilityIsDegenerate) {
  auto p = reference_params();
  p.sigma = 0.0;
  EXPECT_THROW(equilibrium::stackelberg_price(p, riccati::scalar_gains(p), 0.0), DegenerateError);
}

TEST(Presets, ExistingSystemUsesZeroCapacityCost) {
  const auto p = reference_params(1.0, 1.0, 100.0);
  const auto g = riccati::scalar_gains(p);
  const auto pre = equilibrium::preset_prices(p, g);
  EXPECT_DOUBLE_EQ(pre.P_F0, equilibrium::stackelberg_price(p, g, 0.0).P_F);
  auto e = p;
  e.h = 0.0;
  const auto sd = equilibrium::stackelberg_price(e, g, p.D - p.pi / (2 * p.lambda));
  EXPECT_DOUBLE_EQ(pre.P_F_tildeD, sd.P_F);
  EXPECT_DOUBLE_EQ(pre.P_diamond_tildeD, sd.P_diamond);
}

TEST(Calibration, HitsTargetDemandPrice) {
  const auto p = reference_params(1.0, 1.0, 100.0);
  const double g = equilibrium::calibrate_gamma(p, 282.0);
  EXPECT_NEAR(g, calibrated_gamma, 1e-6 * calibrated_gamma);
  auto q = p;
  q.gamma = g;
  EXPECT_NEAR(consumer::price_bounds(q, riccati::scalar_gains(q)).P_D, 282.0, 1e-6);
  EXPECT_NEAR(riccati::scalar_gains(q).K_c, 0.0224444, 1e-6);
  EXPECT_THROW(equilibrium::calibrate_gamma(p, 79.0), CalibrationError);
  EXPECT_THROW(equilibrium::calibrate_gamma(p, 1e12), CalibrationError);
}

TEST(Ordering, ReferenceMarketOrdering) {
  const auto p = reference_params(calibrated_gamma, 1.0, 100.0);
  const auto vs = equilibrium::ordering_report(p);
  ASSERT_EQ(vs.size(), 5u);
  for (const auto& v : vs) EXPECT_TRUE(v.holds) << v.name << ": " << v.lhs << " vs " << v.rhs;
}

TEST(Report, FieldsAreConsistent) {
  auto p = reference_params(calibrated_gamma, 1e-2, 100.0);
  p.q0 = 10000.0;
  const auto r = equilibrium::report(p);
  EXPECT_DOUBLE_EQ(r.stackelberg.P_diamond, equilibrium::stackelberg_price(p, r.gains, p.q0).P_diamond);
  EXPECT_DOUBLE_EQ(r.pareto_outcome.p_bar, r.pareto.P_star);
  EXPECT_NEAR(r.pareto_outcome.x_inf, r.planner_outcome.x_inf, 1e-9 * std::abs(r.planner_outcome.x_inf));
  EXPECT_NEAR(r.bounds.P_D, 282.0, 1e-6);
}

TEST(Battery, LayoutAndInadmissibleCells) {
  const auto bat = equilibrium::scenario_battery(reference_params(), 282.0);
  EXPECT_NEAR(bat.base.gamma, calibrated_gamma, 1e-6 * calibrated_gamma);
  ASSERT_EQ(bat.rows.size(), 4u);
  const double pis[] = {0, 0, 100, 100}, deltas[] = {1, 1e-2, 1, 1e-2};
  for (int k = 0; k < 4; ++k) {
    const auto& r = bat.rows[k];
    EXPECT_EQ(r.pi, pis[k]);
    EXPECT_EQ(r.delta, deltas[k]);
    EXPECT_TRUE(r.pareto.admissible);
    EXPECT_TRUE(r.stackelberg_empty.admissible);
    EXPECT_TRUE(r.stackelberg_existing.admissible);
    // Without a carbon tax an all-centralised system has no Pareto price above the distributed floor.
    EXPECT_EQ(r.pareto_existing.admissible, r.pi > 0) << k;
    EXPECT_LT(r.pareto.price, r.stackelberg_empty.price);
  }
  // A more flexible centralised system supports more distributed capacity at the optimum.
  EXPECT_GT(bat.rows[1].pareto.x_inf, bat.rows[0].pareto.x_inf);
  EXPECT_GT(bat.rows[3].pareto.x_inf, bat.rows[2].pareto.x_inf);
}
