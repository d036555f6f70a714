#pragma once

// Complex samples on a uniform periodic grid of [-X, X) (n = 1).

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <numbers>

namespace gfprop {

struct UniformGrid {
  double X = 12.0;
  int N = 2048;

  double spacing() const { return 2.0 * X / N; }
  double node(int j) const { return -X + j * spacing(); }
  Eigen::VectorXd nodes() const { return Eigen::VectorXd::LinSpaced(N, -X, X - spacing()); }
  bool operator==(const UniformGrid& o) const { return X == o.X && N == o.N; }
};

struct Wavefunction {
  UniformGrid grid;
  Eigen::VectorXcd values;
  double hbar = 1.0;

  // Trapezoid rule, which on a periodic grid is dx times the sum.
  double norm() const { return std::sqrt(grid.spacing() * values.squaredNorm()); }
};

struct GaussianDatum {
  double center = 0.0;
  double momentum = 0.0;
  double width = 0.0;  // s in exp(-(x - c)^2 / (2 s^2)); 0 means sqrt(hbar)
};

inline double resolved_width(const GaussianDatum& g, double hbar) { return g.width > 0.0 ? g.width : std::sqrt(hbar); }

// (pi s^2)^{-1/4} exp(-(x - c)^2 / (2 s^2) + i p (x - c) / hbar), unit L2 norm on R.
inline Wavefunction gaussian_packet(const UniformGrid& grid, double hbar, const GaussianDatum& g) {
  const double s = resolved_width(g, hbar);
  Wavefunction out{grid, Eigen::VectorXcd(grid.N), hbar};
  const double amp = std::pow(std::numbers::pi * s * s, -0.25);
  for (int j = 0; j < grid.N; ++j) {
    const double d = grid.node(j) - g.center;
    out.values(j) = amp * std::exp(std::complex<double>(-d * d / (2.0 * s * s), g.momentum * d / hbar));
  }
  return out;
}

}  // namespace gfprop
