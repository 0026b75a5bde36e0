#pragma once

#include <Eigen/Dense>
#include <complex>

namespace gramdos {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Index = Eigen::Index;

/// Spectral parameter in the open upper half-plane.
struct SpectralParameter {
  double re = 0.0;
  double im = 0.0;

  SpectralParameter() = default;
  SpectralParameter(double energy, double eta) : re(energy), im(eta) {}
  explicit SpectralParameter(Complex z) : re(z.real()), im(z.imag()) {}

  Complex value() const { return {re, im}; }
  bool valid() const { return im > 0.0 && std::isfinite(re) && std::isfinite(im); }
};

}  // namespace gramdos
