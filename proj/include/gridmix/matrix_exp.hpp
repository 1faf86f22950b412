#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace gridmix {

// exp(A) by scaling and squaring with the diagonal Pade(6,6) approximant.
inline Eigen::Matrix2d expm_pade6(const Eigen::Matrix2d& A) {
  const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) s = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
  const Eigen::Matrix2d X = A / std::ldexp(1.0, s);
  constexpr int q = 6;
  double c = 1.0;
  Eigen::Matrix2d Xk = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d Num = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d Den = Eigen::Matrix2d::Identity();
  for (int k = 1; k <= q; ++k) {
    c *= static_cast<double>(q - k + 1) / (k * (2 * q - k + 1));
    Xk = Xk * X;
    Num += c * Xk;
    Den += ((k % 2 == 0) ? c : -c) * Xk;
  }
  Eigen::Matrix2d E = Den.partialPivLu().solve(Num);
  for (int i = 0; i < s; ++i) E = E * E;
  return E;
}

// exp(A) for a real 2x2 matrix. Distinct eigenvalues use the two-point
// interpolation exp(A) = e^{l2} I + f[l1,l2] (A - l2 I) with the divided
// difference written through expm1, so stiff spectra neither overflow nor
// cancel. Nearly coincident eigenvalues fall back to Pade.
inline Eigen::Matrix2d expm2(const Eigen::Matrix2d& A) {
  const double half_tr = 0.5 * A.trace();
  const double det = A.determinant();
  const double disc = half_tr * half_tr - det;
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  if (disc > 0.0) {
    const double q = std::sqrt(disc);
    // Larger-magnitude root first, the other via the product to avoid cancellation.
    const double big = (half_tr >= 0.0) ? half_tr + q : half_tr - q;
    const double small = (big != 0.0) ? det / big : 0.0;
    const double l1 = std::max(big, small);
    const double l2 = std::min(big, small);
    if (l1 - l2 > 1e-8 * std::max(std::abs(l1), std::abs(l2))) {
      const double e1 = std::exp(l1);
      const double dd = -e1 * std::expm1(l2 - l1) / (l1 - l2);
      return std::exp(l2) * I + dd * (A - l2 * I);
    }
  } else if (disc < 0.0) {
    const double w = std::sqrt(-disc);
    if (w > 1e-8 * std::hypot(half_tr, w)) {
      const double e = std::exp(half_tr);
      return e * (std::cos(w) * I + (std::sin(w) / w) * (A - half_tr * I));
    }
  }
  return expm_pade6(A);
}

}  // namespace gridmix
