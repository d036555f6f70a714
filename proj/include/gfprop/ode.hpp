#pragma once

// Adaptive Dormand-Prince 5(4) integrator with FSAL and local extrapolation.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gfprop {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 picks |t1 - t0| / 100
  long max_steps = 1000000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
};

class StepSizeUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integrates y' = rhs(t, y) from t0 to t1 (t1 may be smaller than t0).
template <typename Rhs>
Eigen::VectorXd integrate_dp45(Rhs&& rhs, double t0, double t1, Eigen::VectorXd y, const OdeOptions& opt = {},
                               OdeStats* stats = nullptr) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (t1 == t0) return y;
  const double span = t1 - t0;
  const double dir = span > 0 ? 1.0 : -1.0;
  double h = opt.initial_step > 0 ? opt.initial_step : std::abs(span) / 100.0;
  double t = t0;
  Eigen::VectorXd k1 = rhs(t, y), k2, k3, k4, k5, k6, k7, ynew;
  long steps = 0;
  while (dir * (t1 - t) > 0) {
    if (++steps > opt.max_steps) throw StepSizeUnderflow("integrate_dp45: step budget exhausted");
    if (h < 1e-14 * std::max(1.0, std::abs(t))) throw StepSizeUnderflow("integrate_dp45: step size underflow");
    h = std::min(h, std::abs(t1 - t));
    const double hs = dir * h;
    k2 = rhs(t + c2 * hs, y + hs * (a21 * k1));
    k3 = rhs(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    k4 = rhs(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    k5 = rhs(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    k6 = rhs(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = rhs(t + hs, ynew);
    const Eigen::VectorXd err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double errnorm = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
      errnorm = std::max(errnorm, std::abs(err(i)) / sc);
    }
    if (errnorm <= 1.0) {
      t = (std::abs(t1 - t) <= h) ? t1 : t + hs;
      y = ynew;
      k1 = k7;
      if (stats) ++stats->accepted;
    } else if (stats) {
      ++stats->rejected;
    }
    const double factor = errnorm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(errnorm, -0.2), 0.2, 5.0);
    h *= factor;
  }
  return y;
}

}  // namespace gfprop
