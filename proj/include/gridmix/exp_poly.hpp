#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gridmix/errors.hpp"

namespace gridmix {

// Finite sum of coef * t^power * exp(-rate * t). Closed under the three
// operations the closed-form controls need: forward discounting, causal
// exponential smoothing and products.
struct ExpTerm {
  double coef;
  double rate;
  int power;
};

class ExpPoly {
 public:
  ExpPoly() = default;

  static ExpPoly constant(double c) { return term(c, 0.0, 0); }
  static ExpPoly exponential(double c, double rate) { return term(c, rate, 0); }
  static ExpPoly term(double c, double rate, int power) {
    ExpPoly e;
    e.add(c, rate, power);
    return e;
  }

  const std::vector<ExpTerm>& terms() const { return terms_; }

  double operator()(double t) const {
    double s = 0.0;
    for (const auto& k : terms_) {
      if (k.coef == 0.0) continue;
      s += k.coef * std::pow(t, k.power) * std::exp(-k.rate * t);
    }
    return s;
  }

  // d/dt
  ExpPoly derivative() const {
    ExpPoly d;
    for (const auto& k : terms_) {
      if (k.power > 0) d.add(k.coef * k.power, k.rate, k.power - 1);
      d.add(-k.rate * k.coef, k.rate, k.power);
    }
    return d;
  }

  // Smallest decay rate present; integrability against exp(-r t) needs r + min_rate > 0.
  double min_rate() const {
    double m = 0.0;
    bool first = true;
    for (const auto& k : terms_) {
      if (k.coef == 0.0) continue;
      m = first ? k.rate : std::min(m, k.rate);
      first = false;
    }
    return m;
  }

  // s -> f(t0 + s); t0 >= 0 keeps every coefficient bounded.
  ExpPoly shifted(double t0) const {
    ExpPoly out;
    for (const auto& k : terms_) {
      const double damp = k.coef * std::exp(-k.rate * t0);
      double binom = 1.0;
      for (int j = 0; j <= k.power; ++j) {
        // (t0 + s)^p = sum_j C(p,j) t0^(p-j) s^j
        out.add(damp * binom * std::pow(t0, k.power - j), k.rate, j);
        binom = binom * (k.power - j) / (j + 1);
      }
    }
    return out;
  }

  // s -> int_s^inf exp(-r(u-s)) f(u) du
  ExpPoly forward_discount(double r) const {
    ExpPoly out;
    for (const auto& k : terms_) {
      if (k.coef == 0.0) continue;
      const double a = r + k.rate;
      if (!(a > 0.0)) throw DomainError("forward discount diverges: r + rate <= 0");
      // u^p e^{-ku} under the kernel gives e^{-ks} sum_j C(p,j) s^(p-j) j!/a^(j+1)
      double binom = 1.0;
      double fact = 1.0;
      for (int j = 0; j <= k.power; ++j) {
        if (j > 0) fact *= j;
        out.add(k.coef * binom * fact / std::pow(a, j + 1), k.rate, k.power - j);
        binom = binom * (k.power - j) / (j + 1);
      }
    }
    return out;
  }

  // int_t^inf exp(-r(u-t)) f(u) du at one point.
  double discounted_from(double r, double t) const { return forward_discount(r)(t); }

  // t -> int_0^t exp(-f(t-s)) g(s) ds
  ExpPoly smooth(double f) const {
    ExpPoly out;
    for (const auto& k : terms_) {
      if (k.coef == 0.0) continue;
      const double g = f - k.rate;
      const double scale = std::max({std::abs(f), std::abs(k.rate), 1e-300});
      if (std::abs(g) <= coincidence_tol * scale) {
        out.add(k.coef / (k.power + 1), f, k.power + 1);
        continue;
      }
      // e^{-ft} int_0^t s^p e^{gs} ds
      //   = e^{-kt} sum_j (-1)^j p!/(p-j)! t^(p-j)/g^(j+1) - (-1)^p p!/g^(p+1) e^{-ft}
      double falling = 1.0;
      for (int j = 0; j <= k.power; ++j) {
        if (j > 0) falling *= (k.power - j + 1);
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        out.add(k.coef * sign * falling / std::pow(g, j + 1), k.rate, k.power - j);
      }
      const double sign_p = (k.power % 2 == 0) ? 1.0 : -1.0;
      out.add(-k.coef * sign_p * falling / std::pow(g, k.power + 1), f, 0);
    }
    return out;
  }

  ExpPoly& operator+=(const ExpPoly& o) {
    for (const auto& k : o.terms_) add(k.coef, k.rate, k.power);
    return *this;
  }
  ExpPoly& operator-=(const ExpPoly& o) {
    for (const auto& k : o.terms_) add(-k.coef, k.rate, k.power);
    return *this;
  }
  ExpPoly& operator*=(double s) {
    for (auto& k : terms_) k.coef *= s;
    return *this;
  }
  friend ExpPoly operator+(ExpPoly a, const ExpPoly& b) { return a += b; }
  friend ExpPoly operator-(ExpPoly a, const ExpPoly& b) { return a -= b; }
  friend ExpPoly operator*(ExpPoly a, double s) { return a *= s; }
  friend ExpPoly operator*(double s, ExpPoly a) { return a *= s; }
  friend ExpPoly operator+(ExpPoly a, double c) { return a += constant(c); }
  friend ExpPoly operator+(double c, ExpPoly a) { return a += constant(c); }
  friend ExpPoly operator-(double c, const ExpPoly& a) { return constant(c) - a; }
  friend ExpPoly operator-(ExpPoly a, double c) { return a -= constant(c); }

  friend ExpPoly operator*(const ExpPoly& a, const ExpPoly& b) {
    ExpPoly out;
    for (const auto& x : a.terms_)
      for (const auto& y : b.terms_) out.add(x.coef * y.coef, x.rate + y.rate, x.power + y.power);
    return out;
  }

  // Rates closer than this (relative) are merged into a resonant t^(p+1) term.
  static constexpr double coincidence_tol = 1e-9;

 private:
  void add(double c, double rate, int power) {
    if (c == 0.0) return;
    for (auto& k : terms_) {
      if (k.power == power && k.rate == rate) {
        k.coef += c;
        return;
      }
    }
    terms_.push_back({c, rate, power});
  }

  std::vector<ExpTerm> terms_;
};

}  // namespace gridmix
