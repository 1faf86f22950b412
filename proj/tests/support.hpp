#pragma once

#include <cmath>
#include <random>

#include "gridmix/params.hpp"

namespace testing_support {

// Log-uniform draws over the ranges the model is used in; sigma^2 stays below rho.
inline gridmix::ModelParams random_params(std::mt19937_64& rng) {
  auto logu = [&](double lo, double hi) {
    return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
  };
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  gridmix::ModelParams p;
  p.rho = uni(0.02, 0.2);
  p.sigma = std::sqrt(p.rho) * uni(0.1, 0.95);
  p.b = uni(0.05, 0.4);
  p.gamma = logu(1e-6, 10.0);
  p.delta = logu(1e-3, 10.0);
  p.eta = logu(1.0, 1e4);
  p.lambda = logu(1.0, 1e7);
  p.D = logu(1e3, 1e5);
  p.theta = uni(0.0, 80.0);
  p.pi = uni(0.0, 150.0);
  p.set_annuity_distributed(uni(60.0, 200.0));
  p.set_annuity_centralised(uni(30.0, 150.0));
  return p;
}

}  // namespace testing_support
