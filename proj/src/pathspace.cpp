#include "gfprop/pathspace.hpp"

#include <stdexcept>
#include <string>

#include "gfprop/quadrature.hpp"

namespace gfprop {

FourierBasis FourierBasis::make(double period, int cutoff, int tail_cutoff, int dim) {
  if (!(period > 0.0) || !std::isfinite(period)) throw std::invalid_argument("FourierBasis: period must be positive");
  if (cutoff < 1) throw std::invalid_argument("FourierBasis: cutoff M must be >= 1");
  if (tail_cutoff <= cutoff) throw std::invalid_argument("FourierBasis: tail cutoff must exceed M");
  if (dim < 1) throw std::invalid_argument("FourierBasis: dimension must be >= 1");
  return FourierBasis{period, cutoff, tail_cutoff, dim};
}

int band_first_mode(const FourierBasis& basis, Band band) {
  return band == Band::tail ? basis.low_modes() : 0;
}

int band_mode_count(const FourierBasis& basis, Band band) {
  switch (band) {
    case Band::low: return basis.low_modes();
    case Band::tail: return basis.tail_modes();
    case Band::full: return basis.full_modes();
  }
  return 0;
}

SampledPath standard_nodes(const FourierBasis& basis) {
  const LegendrePanel& ref = panel16();
  const int q = ref.size();
  const int panels = std::max(1, (basis.tail_cutoff + 2) / 2);
  const double h = basis.period / panels;
  SampledPath out;
  out.nodes.resize(panels * q);
  out.weights.resize(panels * q);
  for (int p = 0; p < panels; ++p) {
    for (int a = 0; a < q; ++a) {
      out.nodes(p * q + a) = p * h + 0.5 * h * (ref.nodes()(a) + 1.0);
      out.weights(p * q + a) = 0.5 * h * ref.weights()(a);
    }
  }
  out.values = Eigen::MatrixXd::Zero(panels * q, basis.components());
  return out;
}

SampledPath sample_path(const FourierBasis& basis, const std::function<Eigen::VectorXd(double)>& path) {
  SampledPath out = standard_nodes(basis);
  for (Eigen::Index j = 0; j < out.nodes.size(); ++j) out.values.row(j) = path(out.nodes(j)).transpose();
  return out;
}

Eigen::VectorXd synthesize(const ModeVector& modes, double s) {
  const FourierBasis& b = modes.basis();
  if (!(s >= 0.0 && s <= b.period)) throw std::domain_error("synthesize: s outside [0, T]");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b.components());
  for (int r = 0; r < modes.mode_count(); ++r)
    out += basis_function(b, modes.first_mode() + r, s) * modes.coeffs().row(r).transpose();
  return out;
}

Eigen::VectorXd Antiderivative::operator()(double s) const {
  const FourierBasis& b = modes_.basis();
  const double T = b.period;
  // Primitive of each mode vanishing at 0.
  auto primitive = [&](int mode, double x) {
    if (mode == 0) return x / std::sqrt(T);
    const int r = (mode + 1) / 2;
    const double w = 2.0 * std::numbers::pi * r / T;
    const double c = std::sqrt(2.0 / T) / w;
    return mode % 2 == 1 ? c * std::sin(w * x) : c * (1.0 - std::cos(w * x));
  };
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b.components());
  for (int r = 0; r < modes_.mode_count(); ++r) {
    const int mode = modes_.first_mode() + r;
    const double weight = upper_ < 0.0 ? primitive(mode, s) : primitive(mode, upper_) - primitive(mode, s);
    out += weight * modes_.coeffs().row(r).transpose();
  }
  return out;
}

Antiderivative antideriv_from_zero(const ModeVector& modes) { return Antiderivative(modes, -1.0); }

Antiderivative antideriv_to_t(const ModeVector& modes, double t) {
  if (!(t >= 0.0 && t <= modes.basis().period)) throw std::domain_error("antideriv_to_t: t outside [0, T]");
  return Antiderivative(modes, t);
}

ModeVector project(const SampledPath& samples, const FourierBasis& basis, Band band) {
  const Eigen::Index nodes = samples.nodes.size();
  if (nodes < 8 * (basis.tail_cutoff + 1))
    throw std::invalid_argument("project: insufficient quadrature nodes (" + std::to_string(nodes) + " < 8(M_tail+1))");
  if (samples.values.rows() != nodes || samples.values.cols() != basis.components())
    throw std::invalid_argument("project: sample shape does not match basis");
  ModeVector out(basis, band);
  const int first = band_first_mode(basis, band);
  const int count = band_mode_count(basis, band);
  std::vector<double> row(first + count);
  for (Eigen::Index j = 0; j < nodes; ++j) {
    basis_row(basis, samples.nodes(j), first + count, row.data());
    for (int r = 0; r < count; ++r)
      out.coeffs().row(r) += (samples.weights(j) * row[first + r]) * samples.values.row(j);
  }
  return out;
}

}  // namespace gfprop
