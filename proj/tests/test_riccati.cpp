#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "gridmix/riccati.hpp"
#include "support.hpp"

using namespace gridmix;

namespace {

using LD = long double;
using M2 = Eigen::Matrix<LD, 2, 2>;
using V3 = Eigen::Matrix<LD, 3, 1>;

struct Coeffs {
  M2 Ninv, S, Q;
  LD rho;
};

// Built from the parameters directly, independent of the library's assembly.
Coeffs coeffs(const ModelParams& p) {
  Coeffs c;
  c.rho = p.rho;
  c.Ninv << LD(p.b) * p.b / p.gamma, 0, 0, 1.0L / p.delta;
  c.S << p.sigma, 0, 0, 0;
  c.Q << LD(p.lambda) + p.eta, p.lambda, p.lambda, p.lambda;
  return c;
}

M2 sym(const V3& v) { return (M2() << v(0), v(1), v(1), v(2)).finished(); }
V3 vec(const M2& m) { return V3(m(0, 0), m(0, 1), m(1, 1)); }

// F(X) = X N X + rho X - [S X S] - C
M2 riccati_map(const Coeffs& c, const M2& X, const M2& C, bool sxs) {
  M2 r = X * c.Ninv * X + c.rho * X - C;
  if (sxs) r -= c.S * X * c.S;
  return r;
}

// Newton-Kleinman in long double from a dominating diagonal start.
M2 newton_oracle(const Coeffs& c, const M2& C, bool sxs) {
  const LD big = 10.0L * std::sqrt(C.cwiseAbs().maxCoeff() / c.Ninv.diagonal().minCoeff()) + 10.0L * c.rho /
                                                                                                 c.Ninv.diagonal().minCoeff();
  M2 X = big * M2::Identity();
  for (int it = 0; it < 200; ++it) {
    Eigen::Matrix<LD, 3, 3> J;
    for (int k = 0; k < 3; ++k) {
      V3 e = V3::Zero();
      e(k) = 1;
      const M2 E = sym(e);
      M2 d = E * c.Ninv * X + X * c.Ninv * E + c.rho * E;
      if (sxs) d -= c.S * E * c.S;
      J.col(k) = vec(d);
    }
    const V3 step = J.partialPivLu().solve(-vec(riccati_map(c, X, C, sxs)));
    X += sym(step);
    if (step.cwiseAbs().maxCoeff() <= 1e-17L * X.cwiseAbs().maxCoeff()) break;
  }
  return X;
}

// Lambda N Lambda + rho Lambda = C has the closed form
// N^-1/2 (sqrt(rho^2/4 + N^1/2 C N^1/2) - rho/2) N^-1/2.
Eigen::Matrix2d lambda_sqrtm(const ModelParams& p, const Eigen::Matrix2d& C) {
  const Eigen::Vector2d nd(p.b * p.b / p.gamma, 1.0 / p.delta);
  const Eigen::Matrix2d Nh = nd.cwiseSqrt().asDiagonal();
  const Eigen::Matrix2d Nih = nd.cwiseSqrt().cwiseInverse().asDiagonal();
  const Eigen::Matrix2d A = 0.25 * p.rho * p.rho * Eigen::Matrix2d::Identity() + Nh * C * Nh;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A);
  const Eigen::Matrix2d root = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  return Nih * (root - 0.5 * p.rho * Eigen::Matrix2d::Identity()) * Nih;
}

double rel(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

ModelParams small_instance() {
  auto p = reference_params(1.0, 1.0, 100.0);
  p.lambda = 100.0;
  p.eta = 1.0;
  return p;
}

}  // namespace

TEST(ScalarGains, RootsSolveTheirQuadratics) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto p = testing_support::random_params(rng);
    const auto g = riccati::scalar_gains(p);
    EXPECT_GT(g.K_c, 0.0);
    EXPECT_GT(g.Lambda_c, 0.0);
    EXPECT_GT(g.K_f, 0.0);
    EXPECT_LT(riccati::consumer_k_residual(p, g.K_c), 1e-13);
    EXPECT_LT(riccati::consumer_lambda_residual(p, g.K_c, g.Lambda_c), 1e-13);
    EXPECT_LT(riccati::firm_residual(p, g.K_f), 1e-13);
    // Positive root of a K^2 + b K - c from the textbook formula in long double.
    const LD a = LD(p.b) * p.b / p.gamma, bb = LD(p.rho) - LD(p.sigma) * p.sigma;
    const LD K = (-bb + std::sqrt(bb * bb + 4 * a * p.eta)) / (2 * a);
    EXPECT_NEAR(g.K_c, double(K), 1e-9 * g.K_c);
  }
}

TEST(ScalarGains, FirmIdentity) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const auto p = testing_support::random_params(rng);
    const double Kf = riccati::firm_gain(p);
    const double rd = p.rho * p.delta + Kf;
    EXPECT_NEAR(rd * rd - p.lambda * p.delta, p.rho * p.delta * rd, 1e-10 * rd * rd);
  }
}

TEST(ScalarGains, ReferenceCalibratedValue) {
  auto p = reference_params();
  p.gamma = 1.2938866836e-8;
  EXPECT_NEAR(riccati::scalar_gains(p).K_c, 0.0224444, 1e-6);
}

TEST(ScalarGains, ZeroSourceGivesZeroGain) {
  EXPECT_EQ(riccati::positive_root(2.0, 0.1, 0.0), 0.0);
  EXPECT_NEAR(riccati::positive_root(1.0, -3.0, 0.0), 3.0, 1e-15);
}

TEST(Sare, MatchesNewtonOracleOnSmallInstance) {
  const auto p = small_instance();
  const auto sol = riccati::solve_sare(p);
  const auto c = coeffs(p);
  const M2 K = newton_oracle(c, c.Q, true);
  EXPECT_LT(rel(sol.K, K.cast<double>()), 1e-9) << sol.K << "\n" << K.cast<double>();
  EXPECT_LE(sol.residual_K, 1e-10);
  EXPECT_LE(sol.residual_Lambda, 1e-10);
}

TEST(Sare, MatchesNewtonOracleOnReferenceScale) {
  for (double delta : {1.0, 1e-2}) {
    auto p = reference_params(1.2938866836e-8, delta, 100.0);
    const auto sol = riccati::solve_sare(p);
    const auto c = coeffs(p);
    const M2 K = newton_oracle(c, c.Q, true);
    EXPECT_LT(rel(sol.K, K.cast<double>()), 1e-8) << "delta=" << delta;
  }
}

TEST(Sare, LambdaMatchesMatrixSquareRoot) {
  for (const auto& p : {small_instance(), reference_params(1.0, 1e-2, 0.0), reference_params(1.2938866836e-8, 1.0, 100.0)}) {
    const auto sol = riccati::solve_sare(p);
    Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
    S(0, 0) = p.sigma;
    Eigen::Matrix2d Q;
    Q << p.lambda + p.eta, p.lambda, p.lambda, p.lambda;
    Eigen::Matrix2d Qt = Eigen::Matrix2d::Zero();
    Qt(0, 0) = -p.eta;
    const auto ref = lambda_sqrtm(p, S * sol.K * S + Q + Qt);
    EXPECT_LT(rel(sol.Lambda, ref), 1e-9) << sol.Lambda << "\n" << ref;
  }
}

TEST(Sare, SolutionsArePositiveDefiniteAndSymmetric) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 25; ++i) {
    const auto p = testing_support::random_params(rng);
    const auto sol = riccati::solve_sare(p);
    for (const auto* X : {&sol.K, &sol.Lambda}) {
      EXPECT_EQ((*X)(0, 1), (*X)(1, 0));
      EXPECT_GT((*X)(0, 0), 0.0);
      EXPECT_GT(X->determinant(), 0.0);
    }
    EXPECT_LT(riccati::sare_equations(p, sol.K, sol.Lambda).cwiseAbs().maxCoeff(),
              1e-8 * (p.lambda + p.eta));
  }
}

// The stabilising solution is the unique limit: other positive seeds land on it.
TEST(Sare, SeedIndependence) {
  const auto p = small_instance();
  const auto base = riccati::solve_sare(p);
  for (double s : {1.0, 50.0, 1e4}) {
    const Eigen::Matrix2d seed = s * Eigen::Matrix2d::Identity();
    const auto other = riccati::solve_sare_from(p, seed, seed);
    EXPECT_LT(rel(other.K, base.K), 1e-10) << "seed " << s;
    EXPECT_LT(rel(other.Lambda, base.Lambda), 1e-10) << "seed " << s;
  }
}

TEST(Sare, FlowAloneReachesToleranceWithoutPolish) {
  SareOptions opt;
  opt.polish = false;
  opt.tol = 1e-9;
  const auto sol = riccati::solve_sare(small_instance(), opt);
  EXPECT_LE(sol.residual_K, 1e-9);
  EXPECT_LT(rel(sol.K, riccati::solve_sare(small_instance()).K), 1e-7);
}

TEST(Sare, StepBudgetExhaustionThrows) {
  SareOptions opt;
  opt.max_steps = 3;
  EXPECT_THROW(riccati::solve_sare(small_instance(), opt), NonConvergence);
}

TEST(Sare, ZeroCommitmentPenaltyIsDegenerate) {
  auto p = small_instance();
  p.lambda = 0.0;
  EXPECT_THROW(riccati::solve_sare(p), DegenerateError);
}

TEST(Sare, InvalidParametersAreRejected) {
  auto p = small_instance();
  p.rho = p.sigma * p.sigma;
  EXPECT_THROW(riccati::solve_sare(p), ValidationError);
}

// More expensive distributed adjustment makes the planner weigh distributed
// variance more: K11 does not decrease in gamma.
TEST(Sare, K11NondecreasingInGamma) {
  for (double delta : {1e-2, 1.0}) {
    double prev = 0.0;
    for (double g : {1e-9, 1e-8, 1e-7, 1e-5, 1e-3, 1e-1, 1.0}) {
      const double K11 = riccati::solve_sare(reference_params(g, delta, 100.0)).K(0, 0);
      EXPECT_GE(K11, prev * (1 - 1e-9)) << "gamma " << g;
      prev = K11;
    }
  }
}

// Without the commitment coupling the K system splits into the consumer's
// scalar equation (with eta + lambda) and the firm's.
TEST(Sare, DiagonalLimitWhenCouplingIsSmall) {
  auto p = small_instance();
  p.lambda = 1e-9;
  const auto sol = riccati::solve_sare(p);
  auto q = p;
  q.eta = p.eta + p.lambda;
  EXPECT_NEAR(sol.K(0, 0), riccati::consumer_gains(q).K_c, 1e-6 * sol.K(0, 0));
  EXPECT_NEAR(sol.K(1, 1), riccati::firm_gain(p), 1e-6 * std::max(sol.K(1, 1), 1e-12) + 1e-12);
}
