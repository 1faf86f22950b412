#pragma once

#include <algorithm>
#include <cmath>

namespace gridmix {

template <class State>
struct OdeResult {
  State y;
  double t = 0.0;
  long steps = 0;
  bool stopped = false;  // the stop predicate fired before t_end / max_steps
};

// Dormand-Prince 5(4) with FSAL and a PI step controller. `stop(t, y, dy)` is
// evaluated after every accepted step with the derivative at the new point.
// State must support +, scalar * and .cwiseAbs()/.maxCoeff() (Eigen vectors).
template <class State, class F, class Stop>
OdeResult<State> integrate_dopri(F&& f, State y, double t0, double t_end, double h0, double rtol,
                                 double atol, long max_steps, Stop&& stop) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeResult<State> out{y, t0, 0, false};
  double t = t0;
  double h = h0;
  double err_prev = 1e-4;
  State k1 = f(t, y);
  while (t < t_end && out.steps < max_steps) {
    h = std::min(h, t_end - t);
    const State k2 = f(t + c2 * h, State(y + h * (a21 * k1)));
    const State k3 = f(t + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
    const State k4 = f(t + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const State k5 = f(t + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const State k6 =
        f(t + h, State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    const State y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const State k7 = f(t + h, y_new);
    const State err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const State scale = (atol + rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
    const double err = (err_vec.cwiseAbs().array() / scale.array()).maxCoeff();
    ++out.steps;
    if (err <= 1.0) {
      t += h;
      y = y_new;
      k1 = k7;
      // PI controller (Gustafsson), exponents for a 5th-order pair.
      const double e = std::max(err, 1e-10);
      double fac = 0.9 * std::pow(e, -0.7 / 5) * std::pow(err_prev, 0.4 / 5);
      fac = std::clamp(fac, 0.2, 5.0);
      h *= fac;
      err_prev = e;
      if (stop(t, y, k1)) {
        out.stopped = true;
        break;
      }
    } else {
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.1;
      h *= fac;
      if (h <= 1e-15 * (std::abs(t) + 1.0)) break;  // step size underflow
    }
  }
  out.y = y;
  out.t = t;
  return out;
}

// One classical Runge-Kutta step for y' = f(t, y).
template <class State, class F>
State rk4_step(F&& f, double t, const State& y, double h) {
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * h, State(y + (0.5 * h) * k1));
  const State k3 = f(t + 0.5 * h, State(y + (0.5 * h) * k2));
  const State k4 = f(t + h, State(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace gridmix
