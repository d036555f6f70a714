#pragma once

#include <Eigen/Core>

namespace gfprop {

struct GaussRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

// Gauss-Legendre rule on [-1, 1].
GaussRule gauss_legendre(int points);

// Gauss-Hermite rule for the weight exp(-x^2) on the real line (Golub-Welsch).
GaussRule gauss_hermite(int points);

// Reference data for one Gauss-Legendre panel: nodes, weights, the spectral
// integration matrix A(a, b) = int_{-1}^{u_a} l_b(u) du and barycentric
// weights for interpolation through the nodes.
class LegendrePanel {
 public:
  explicit LegendrePanel(int points);

  int size() const { return static_cast<int>(rule_.nodes.size()); }
  const Eigen::VectorXd& nodes() const { return rule_.nodes; }
  const Eigen::VectorXd& weights() const { return rule_.weights; }
  const Eigen::MatrixXd& integration() const { return integration_; }

  // Row r with int_{-1}^{u} p(v) dv = r . p(nodes) for polynomials p of degree < size().
  Eigen::RowVectorXd partial_integration_row(double u) const;
  // Row r with p(u) = r . p(nodes).
  Eigen::RowVectorXd interpolation_row(double u) const;

 private:
  GaussRule rule_;
  Eigen::MatrixXd integration_;
  Eigen::VectorXd barycentric_;
};

// Shared 16-point panel used by all path grids.
const LegendrePanel& panel16();

}  // namespace gfprop
