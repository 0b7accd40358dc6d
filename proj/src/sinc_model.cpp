#include "thz/sinc_model.hpp"

#include <cmath>

namespace thz::sinc {

namespace {
constexpr double kSeriesLimit = 1e-4;  // on |pi t|
}

double sinc(double t) {
  const double x = kPi * t;
  if (std::abs(x) < kSeriesLimit) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

double sinc_derivative(double t) {
  const double x = kPi * t;
  if (std::abs(x) < kSeriesLimit) {
    const double x2 = x * x;
    return kPi * (-x / 3.0 + x * x2 / 30.0);
  }
  return (x * std::cos(x) - std::sin(x)) / (x * t);
}

cdouble model(const ComplexParams& p, double omega, double z) {
  const double env = p.amplitude * sinc(p.sigma * (z - p.mu));
  const double ang = p.phi - omega * z;
  return {env * std::cos(ang), env * std::sin(ang)};
}

double magnitude_model(const MagnitudeParams& p, double z) {
  return p.amplitude * std::abs(sinc(p.sigma * (z - p.mu)));
}

void complex_residuals(const Eigen::VectorXd& x, double omega, std::size_t z_first,
                       std::span<const cdouble> data, Eigen::VectorXd& r) {
  const ComplexParams p{x[0], x[1], x[2], x[3]};
  r.resize(static_cast<Eigen::Index>(2 * data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const cdouble d = model(p, omega, static_cast<double>(z_first + i)) - data[i];
    r[static_cast<Eigen::Index>(2 * i)] = d.real();
    r[static_cast<Eigen::Index>(2 * i + 1)] = d.imag();
  }
}

void complex_jacobian(const Eigen::VectorXd& x, double omega, std::size_t z_first, std::size_t n,
                      Eigen::MatrixXd& J) {
  const double A = x[0], mu = x[1], sigma = x[2], phi = x[3];
  J.resize(static_cast<Eigen::Index>(2 * n), 4);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = static_cast<double>(z_first + i);
    const double t = sigma * (z - mu);
    const double s = sinc(t);
    const double ds = sinc_derivative(t);
    const double ang = phi - omega * z;
    const double c = std::cos(ang), sn = std::sin(ang);
    const auto re = static_cast<Eigen::Index>(2 * i), im = re + 1;
    // v = A s e^{j ang}
    J(re, 0) = s * c;
    J(im, 0) = s * sn;
    const double dmu = -A * ds * sigma;
    J(re, 1) = dmu * c;
    J(im, 1) = dmu * sn;
    const double dsig = A * ds * (z - mu);
    J(re, 2) = dsig * c;
    J(im, 2) = dsig * sn;
    J(re, 3) = -A * s * sn;
    J(im, 3) = A * s * c;
  }
}

void magnitude_residuals(const Eigen::VectorXd& x, std::size_t z_first,
                         std::span<const double> magnitude, Eigen::VectorXd& r) {
  const MagnitudeParams p{x[0], x[1], x[2]};
  r.resize(static_cast<Eigen::Index>(magnitude.size()));
  for (std::size_t i = 0; i < magnitude.size(); ++i)
    r[static_cast<Eigen::Index>(i)] =
        magnitude_model(p, static_cast<double>(z_first + i)) - magnitude[i];
}

void magnitude_jacobian(const Eigen::VectorXd& x, std::size_t z_first, std::size_t n,
                        Eigen::MatrixXd& J) {
  const double A = x[0], mu = x[1], sigma = x[2];
  J.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = static_cast<double>(z_first + i);
    const double t = sigma * (z - mu);
    const double s = sinc(t);
    const double sign = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
    const double ds = sign * sinc_derivative(t);
    const auto row = static_cast<Eigen::Index>(i);
    J(row, 0) = std::abs(s);
    J(row, 1) = -A * ds * sigma;
    J(row, 2) = A * ds * (z - mu);
  }
}

}  // namespace thz::sinc
