#pragma once

// Real trigonometric orthonormal basis of L^2([0,T]; R^{2n}) split into a
// low band (modes 0..M) and a tail band (modes M+1..M_tail).
//
// Mode indices in the full band: 0 is the constant 1/sqrt(T); 2r-1 is
// sqrt(2/T) cos(2 pi r s / T); 2r is sqrt(2/T) sin(2 pi r s / T).
// Components 0..n-1 are position-type, n..2n-1 momentum-type.

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <numbers>

namespace gfprop {

template <typename S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

struct FourierBasis {
  double period = 1.0;
  int cutoff = 1;       // M
  int tail_cutoff = 4;  // M_tail
  int dim = 1;          // n

  static FourierBasis make(double period, int cutoff, int tail_cutoff, int dim);

  int components() const { return 2 * dim; }
  int low_modes() const { return 2 * cutoff + 1; }
  int tail_modes() const { return 2 * (tail_cutoff - cutoff); }
  int full_modes() const { return 2 * tail_cutoff + 1; }
  // k = 2n(2M+1), dimension of the low-band parameter space.
  int parameter_dim() const { return components() * low_modes(); }
};

enum class Band { low, tail, full };

int band_first_mode(const FourierBasis& basis, Band band);
int band_mode_count(const FourierBasis& basis, Band band);

// Value of full-band mode `mode` at s.
template <typename S>
S basis_function(const FourierBasis& basis, int mode, const S& s) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const double T = basis.period;
  if (mode == 0) return S(1.0 / std::sqrt(T));
  const int r = (mode + 1) / 2;
  const S arg = s * (2.0 * std::numbers::pi * r / T);
  return (mode % 2 == 1 ? cos(arg) : sin(arg)) * std::sqrt(2.0 / T);
}

// Values of the first `count` full-band modes at s, by angle-addition recurrence.
template <typename S>
void basis_row(const FourierBasis& basis, const S& s, int count, S* out) {
  using std::cos;
  using std::sin;
  const double T = basis.period;
  out[0] = S(1.0 / std::sqrt(T));
  if (count <= 1) return;
  const double c = std::sqrt(2.0 / T);
  const S arg = s * (2.0 * std::numbers::pi / T);
  const S c1 = cos(arg), s1 = sin(arg);
  S cr = c1, sr = s1;
  for (int r = 1; 2 * r - 1 < count; ++r) {
    out[2 * r - 1] = cr * c;
    if (2 * r < count) out[2 * r] = sr * c;
    const S cn = cr * c1 - sr * s1;
    sr = sr * c1 + cr * s1;
    cr = cn;
  }
}

// Coefficients of a path in one band: rows are modes, columns components.
template <typename S>
class BasicModeVector {
 public:
  BasicModeVector() = default;
  BasicModeVector(const FourierBasis& basis, Band band)
      : basis_(basis), band_(band), coeffs_(MatrixX<S>::Zero(band_mode_count(basis, band), basis.components())) {}
  BasicModeVector(const FourierBasis& basis, Band band, MatrixX<S> coeffs)
      : basis_(basis), band_(band), coeffs_(std::move(coeffs)) {}

  // Flat layout is component-major: all modes of component 0, then component 1, ...
  static BasicModeVector from_flat(const FourierBasis& basis, Band band, const VectorX<S>& flat) {
    const int modes = band_mode_count(basis, band);
    return BasicModeVector(basis, band, Eigen::Map<const MatrixX<S>>(flat.data(), modes, basis.components()));
  }

  const FourierBasis& basis() const { return basis_; }
  Band band() const { return band_; }
  const MatrixX<S>& coeffs() const { return coeffs_; }
  MatrixX<S>& coeffs() { return coeffs_; }
  int first_mode() const { return band_first_mode(basis_, band_); }
  int mode_count() const { return static_cast<int>(coeffs_.rows()); }

  VectorX<S> flat() const { return Eigen::Map<const VectorX<S>>(coeffs_.data(), coeffs_.size()); }
  // L^2([0,T]) norm by Parseval.
  double norm() const;

 private:
  FourierBasis basis_{};
  Band band_ = Band::low;
  MatrixX<S> coeffs_;
};

using ModeVector = BasicModeVector<double>;

template <>
inline double BasicModeVector<double>::norm() const {
  return coeffs_.norm();
}

// Samples of a path on quadrature nodes of [0, T] (or a sub-interval).
struct SampledPath {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  Eigen::MatrixXd values;  // nodes x components
};

// Composite 16-point Gauss-Legendre nodes on [0, T] with ceil((M_tail+1)/2) panels.
SampledPath standard_nodes(const FourierBasis& basis);
SampledPath sample_path(const FourierBasis& basis, const std::function<Eigen::VectorXd(double)>& path);

// Evaluate the path described by `modes` at s in [0, T].
Eigen::VectorXd synthesize(const ModeVector& modes, double s);

// Closed-form antiderivatives of a band-limited path.
class Antiderivative {
 public:
  Antiderivative(ModeVector modes, double upper) : modes_(std::move(modes)), upper_(upper) {}
  // upper < 0 means int_0^s; otherwise int_s^upper.
  Eigen::VectorXd operator()(double s) const;

 private:
  ModeVector modes_;
  double upper_;
};

Antiderivative antideriv_from_zero(const ModeVector& modes);
Antiderivative antideriv_to_t(const ModeVector& modes, double t);

// Orthogonal projection of sampled data onto `band`; needs >= 8(M_tail+1) nodes.
ModeVector project(const SampledPath& samples, const FourierBasis& basis, Band band);

}  // namespace gfprop
