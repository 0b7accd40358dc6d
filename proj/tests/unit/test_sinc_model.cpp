#include <doctest.h>

#include <cmath>
#include <random>

#include "thz/sinc_model.hpp"

using namespace thz;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using ld = long double;
constexpr ld kPiL = 3.141592653589793238462643383279502884L;

ld sinc_ld(ld t) { return t == 0 ? 1.0L : std::sin(kPiL * t) / (kPiL * t); }

// Long-double complex model components, independent of the library.
void model_ld(const ld* x, ld omega, ld z, ld& re, ld& im) {
  const ld s = x[0] * sinc_ld(x[2] * (z - x[1]));
  re = s * std::cos(x[3] - omega * z);
  im = s * std::sin(x[3] - omega * z);
}

MatrixXd fd_complex(const VectorXd& x, double omega, std::size_t z0, std::size_t n) {
  MatrixXd J(2 * n, 4);
  for (int c = 0; c < 4; ++c) {
    const ld h = 1e-7L * std::max<ld>(1.0L, std::abs(static_cast<ld>(x[c])));
    ld xp[4], xm[4];
    for (int i = 0; i < 4; ++i) xp[i] = xm[i] = x[i];
    xp[c] += h;
    xm[c] -= h;
    for (std::size_t i = 0; i < n; ++i) {
      ld rp, ip, rm, im;
      model_ld(xp, omega, static_cast<ld>(z0 + i), rp, ip);
      model_ld(xm, omega, static_cast<ld>(z0 + i), rm, im);
      J(2 * i, c) = static_cast<double>((rp - rm) / (2 * h));
      J(2 * i + 1, c) = static_cast<double>((ip - im) / (2 * h));
    }
  }
  return J;
}

MatrixXd fd_magnitude(const VectorXd& x, std::size_t z0, std::size_t n) {
  MatrixXd J(n, 3);
  for (int c = 0; c < 3; ++c) {
    const ld h = 1e-7L * std::max<ld>(1.0L, std::abs(static_cast<ld>(x[c])));
    ld xp[3], xm[3];
    for (int i = 0; i < 3; ++i) xp[i] = xm[i] = x[i];
    xp[c] += h;
    xm[c] -= h;
    for (std::size_t i = 0; i < n; ++i) {
      const ld z = static_cast<ld>(z0 + i);
      const ld vp = xp[0] * std::abs(sinc_ld(xp[2] * (z - xp[1])));
      const ld vm = xm[0] * std::abs(sinc_ld(xm[2] * (z - xm[1])));
      J(i, c) = static_cast<double>((vp - vm) / (2 * h));
    }
  }
  return J;
}

// Entry-wise relative error, with entries below `floor` compared absolutely.
double worst_relative(const MatrixXd& a, const MatrixXd& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / std::max(std::abs(b(i, j)), floor));
  return worst;
}

}  // namespace

TEST_CASE("sinc values and the removable singularity") {
  CHECK(sinc::sinc(0.0) == 1.0);
  CHECK(sinc::sinc(1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(sinc::sinc(0.5) == doctest::Approx(2.0 / kPi).epsilon(1e-15));
  CHECK(sinc::sinc_derivative(0.0) == 0.0);
  for (double t : {1e-9, 3e-5, 3.18e-5, 3.19e-5, 1e-4, 0.2, -0.7, 2.5}) {
    CHECK(sinc::sinc(t) == doctest::Approx(static_cast<double>(sinc_ld(t))).epsilon(1e-14));
    const ld h = 1e-8L;
    const double fd = static_cast<double>((sinc_ld(t + h) - sinc_ld(t - h)) / (2 * h));
    CHECK(sinc::sinc_derivative(t) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("complex model matches the direct formula") {
  const sinc::ComplexParams p{1.5, 4200.6, 0.1111, 0.7};
  for (double z : {4190.0, 4200.0, 4200.6, 4233.0}) {
    ld re, im;
    const ld x[4] = {p.amplitude, p.mu, p.sigma, p.phi};
    model_ld(x, 0.3489L, z, re, im);
    const auto v = sinc::model(p, 0.3489, z);
    CHECK(v.real() == doctest::Approx(static_cast<double>(re)).epsilon(1e-12));
    CHECK(v.imag() == doctest::Approx(static_cast<double>(im)).epsilon(1e-12));
  }
  CHECK(sinc::magnitude_model({2.0, 10.0, 0.5}, 11.0) == doctest::Approx(2.0 * 2.0 / kPi));
}

TEST_CASE("residual layout is real then imaginary of model minus data") {
  const VectorXd x = (VectorXd(4) << 1.0, 5.0, 0.2, 0.3).finished();
  std::vector<cdouble> data{{0.1, 0.2}, {-0.3, 0.4}, {0.0, 0.0}};
  VectorXd r;
  sinc::complex_residuals(x, 0.5, 4, data, r);
  REQUIRE(r.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto v = sinc::model({1.0, 5.0, 0.2, 0.3}, 0.5, 4.0 + i);
    CHECK(r[2 * i] == doctest::Approx((v - data[i]).real()));
    CHECK(r[2 * i + 1] == doctest::Approx((v - data[i]).imag()));
  }
}

TEST_CASE("complex Jacobian matches central differences at random points") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> A(0.5, 3.0), mu(150.0, 250.0), sg(0.05, 0.3), ph(-kPi, kPi);
  const double omega = 0.3489;
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd x(4);
    x << A(rng), mu(rng), sg(rng), ph(rng);
    // Every tenth point puts a sample within 1e-4 of mu.
    if (trial % 10 == 0) x[1] = std::floor(x[1]) + (trial % 20 == 0 ? 5e-5 : -3e-5);
    const std::size_t z0 = static_cast<std::size_t>(x[1]) - 20, n = 41;
    MatrixXd J;
    sinc::complex_jacobian(x, omega, z0, n, J);
    const MatrixXd ref = fd_complex(x, omega, z0, n);
    CHECK(worst_relative(J, ref, 1e-6 * ref.cwiseAbs().maxCoeff()) < 1e-6);
  }
}

TEST_CASE("magnitude Jacobian matches central differences away from sinc zeros") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> A(0.5, 3.0), mu(150.0, 250.0), sg(0.05, 0.3);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd x(3);
    x << A(rng), mu(rng), sg(rng);
    if (trial % 10 == 0) x[1] = std::floor(x[1]) + 4e-5;
    const std::size_t z0 = static_cast<std::size_t>(x[1]) - 20, n = 41;
    MatrixXd J;
    sinc::magnitude_jacobian(x, z0, n, J);
    const MatrixXd ref = fd_magnitude(x, z0, n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = x[2] * (static_cast<double>(z0 + i) - x[1]);
      // |sinc| has kinks at its zeros; the derivative is undefined there.
      if (std::abs(t) > 0.5 && std::abs(t - std::round(t)) < 1e-3) continue;
      ++checked;
      const double scale = 1e-6 * ref.cwiseAbs().maxCoeff();
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(J(i, c) - ref(i, c)) / std::max(std::abs(ref(i, c)), scale) < 1e-6);
    }
  }
  CHECK(checked > 3500);
}
