#include "gfprop/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gfprop {

namespace {

// P_0..P_{order} at u by the three-term recurrence.
Eigen::VectorXd legendre_values(int order, double u) {
  Eigen::VectorXd p(order + 1);
  p(0) = 1.0;
  if (order >= 1) p(1) = u;
  for (int n = 1; n < order; ++n) p(n + 1) = ((2.0 * n + 1.0) * u * p(n) - n * p(n - 1)) / (n + 1.0);
  return p;
}

}  // namespace

GaussRule gauss_legendre(int points) {
  if (points < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
  GaussRule rule{Eigen::VectorXd(points), Eigen::VectorXd(points)};
  for (int i = 0; i < points; ++i) {
    double u = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = u;
      for (int n = 1; n < points; ++n) {
        const double p2 = ((2.0 * n + 1.0) * u * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = points * (u * p1 - p0) / (u * u - 1.0);
      const double step = p1 / dp;
      u -= step;
      if (std::abs(step) < 1e-16) break;
    }
    // Ascending order.
    rule.nodes(points - 1 - i) = u;
    rule.weights(points - 1 - i) = 2.0 / ((1.0 - u * u) * dp * dp);
  }
  return rule;
}

GaussRule gauss_hermite(int points) {
  if (points < 1) throw std::invalid_argument("gauss_hermite: need at least one point");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
  for (int i = 1; i < points; ++i) {
    jacobi(i, i - 1) = std::sqrt(i / 2.0);
    jacobi(i - 1, i) = jacobi(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussRule rule{eig.eigenvalues(), Eigen::VectorXd(points)};
  for (int i = 0; i < points; ++i) {
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights(i) = std::sqrt(std::numbers::pi) * v0 * v0;
  }
  // Symmetrize to remove eigen-solver noise.
  for (int i = 0; i < points / 2; ++i) {
    const int j = points - 1 - i;
    const double x = 0.5 * (rule.nodes(j) - rule.nodes(i));
    const double w = 0.5 * (rule.weights(i) + rule.weights(j));
    rule.nodes(i) = -x;
    rule.nodes(j) = x;
    rule.weights(i) = rule.weights(j) = w;
  }
  if (points % 2 == 1) rule.nodes(points / 2) = 0.0;
  return rule;
}

LegendrePanel::LegendrePanel(int points) : rule_(gauss_legendre(points)) {
  const int q = points;
  integration_.resize(q, q);
  for (int a = 0; a < q; ++a) integration_.row(a) = partial_integration_row(rule_.nodes(a));
  barycentric_.resize(q);
  for (int b = 0; b < q; ++b) {
    const double u = rule_.nodes(b);
    barycentric_(b) = ((b % 2) ? -1.0 : 1.0) * std::sqrt((1.0 - u * u) * rule_.weights(b));
  }
}

Eigen::RowVectorXd LegendrePanel::partial_integration_row(double u) const {
  const int q = size();
  const Eigen::VectorXd pu = legendre_values(q, u);
  Eigen::RowVectorXd row(q);
  for (int b = 0; b < q; ++b) {
    const Eigen::VectorXd pb = legendre_values(q - 1, rule_.nodes(b));
    double acc = 0.5 * (u + 1.0);
    for (int n = 1; n < q; ++n) acc += 0.5 * pb(n) * (pu(n + 1) - pu(n - 1));
    row(b) = rule_.weights(b) * acc;
  }
  return row;
}

Eigen::RowVectorXd LegendrePanel::interpolation_row(double u) const {
  const int q = size();
  Eigen::RowVectorXd row(q);
  for (int b = 0; b < q; ++b) {
    if (u == rule_.nodes(b)) {
      row.setZero();
      row(b) = 1.0;
      return row;
    }
  }
  double denom = 0.0;
  for (int b = 0; b < q; ++b) {
    row(b) = barycentric_(b) / (u - rule_.nodes(b));
    denom += row(b);
  }
  return row / denom;
}

const LegendrePanel& panel16() {
  static const LegendrePanel panel(16);
  return panel;
}

}  // namespace gfprop
