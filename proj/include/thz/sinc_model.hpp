#pragma once

// Modulated sinc reflection model v(z) = A sinc(sigma (z - mu)) exp(-j (omega z - phi))
// and its magnitude |v| = A |sinc(sigma (z - mu))|, with analytic derivatives.

#include <Eigen/Dense>

#include <cstddef>
#include <span>

#include "thz/core.hpp"

namespace thz::sinc {

/// Normalized sinc, sin(pi t) / (pi t), 1 at t = 0.
double sinc(double t);
/// d/dt sinc(t). Both use a series for |pi t| < 1e-4.
double sinc_derivative(double t);

struct ComplexParams {
  double amplitude, mu, sigma, phi;
};

struct MagnitudeParams {
  double amplitude, mu, sigma;
};

cdouble model(const ComplexParams& p, double omega, double z);
double magnitude_model(const MagnitudeParams& p, double z);

/// Residuals and Jacobian of the complex fit over samples z_first, z_first+1, ...
/// Layout: r[2i] = Re(v - u), r[2i+1] = Im(v - u); columns (A, mu, sigma, phi).
void complex_residuals(const Eigen::VectorXd& x, double omega, std::size_t z_first,
                       std::span<const cdouble> data, Eigen::VectorXd& r);
void complex_jacobian(const Eigen::VectorXd& x, double omega, std::size_t z_first,
                      std::size_t n, Eigen::MatrixXd& J);

/// Residuals |v| - |u| over the window and their Jacobian, columns (A, mu, sigma).
void magnitude_residuals(const Eigen::VectorXd& x, std::size_t z_first,
                         std::span<const double> magnitude, Eigen::VectorXd& r);
void magnitude_jacobian(const Eigen::VectorXd& x, std::size_t z_first, std::size_t n,
                        Eigen::MatrixXd& J);

}  // namespace thz::sinc
