#include <doctest.h>

#include <cmath>
#include <random>

#include "thz/deconv.hpp"
#include "thz/phantom.hpp"

using namespace thz;

namespace {

Image random_image(std::size_t nx, std::size_t ny, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Image img(nx, ny);
  for (double& v : img.values()) v = d(rng);
  return img;
}

Kernel random_kernel(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> v(size * size);
  for (double& x : v) x = d(rng);
  return Kernel(size, std::move(v));
}

// Convolution against an explicitly padded copy (half-sample symmetric padding).
Image padded_convolution(const Image& a, const Kernel& h) {
  const auto r = static_cast<long>(h.radius());
  const long nx = static_cast<long>(a.nx()), ny = static_cast<long>(a.ny());
  const long px = nx + 2 * r, py = ny + 2 * r;
  std::vector<long double> pad(static_cast<std::size_t>(px * py));
  auto mirror = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -1 - i : 2 * n - 1 - i;
    return i;
  };
  for (long y = 0; y < py; ++y)
    for (long x = 0; x < px; ++x)
      pad[static_cast<std::size_t>(y * px + x)] =
          a(static_cast<std::size_t>(mirror(x - r, nx)), static_cast<std::size_t>(mirror(y - r, ny)));
  Image out(a.nx(), a.ny());
  for (long y = 0; y < ny; ++y)
    for (long x = 0; x < nx; ++x) {
      long double acc = 0;
      for (long ty = -r; ty <= r; ++ty)
        for (long tx = -r; tx <= r; ++tx)
          acc += h.at(tx, ty) * pad[static_cast<std::size_t>((y + r - ty) * px + (x + r - tx))];
      out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = static_cast<double>(acc);
    }
  return out;
}

long double dot(const Image& a, const Image& b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a.values()[i]) * b.values()[i];
  return s;
}

double l2_distance(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
  return std::sqrt(s);
}

double center_mass(const Kernel& k) {
  double s = 0;
  for (int y = -1; y <= 1; ++y)
    for (int x = -1; x <= 1; ++x) s += k.at(x, y);
  return s;
}

}  // namespace

TEST_CASE("kernel construction normalizes and validates") {
  Kernel k(3, {1, 2, 1, 2, 4, 2, 1, 2, 1});
  CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k.at(0, 0) == doctest::Approx(0.25));
  CHECK(k.at(-1, -1) == doctest::Approx(1.0 / 16));
  CHECK_THROWS(Kernel(4, std::vector<double>(16, 1.0)));
  CHECK_THROWS(Kernel(3, std::vector<double>(8, 1.0)));
  CHECK_THROWS(Kernel(3, {1, 1, 1, 1, -1, 1, 1, 1, 1}));
  CHECK_THROWS(Kernel(3, std::vector<double>(9, 0.0)));
  const Kernel d = delta_kernel(5);
  CHECK(d.at(0, 0) == 1.0);
  CHECK(d.sum() == 1.0);
}

TEST_CASE("gaussian kernel samples") {
  for (std::size_t size : {3u, 5u, 7u, 15u})
    for (double s : {0.3, 0.8495, 1.284, 4.0}) CHECK(std::abs(gaussian_kernel(size, s).sum() - 1.0) < 1e-9);
  const double s = 0.8495;
  const Kernel g = gaussian_kernel(3, s);
  CHECK(g.at(0, 0) / g.at(1, 0) == doctest::Approx(std::exp(1.0 / (2 * s * s))).epsilon(1e-12));
  CHECK(g.at(0, 0) / g.at(1, 1) == doctest::Approx(std::exp(2.0 / (2 * s * s))).epsilon(1e-12));
  CHECK(g.at(1, 0) == g.at(0, -1));
  const Kernel tiny = gaussian_kernel(5, 1e-6);
  CHECK(tiny.at(0, 0) == 1.0);
  CHECK(tiny.at(1, 0) == 0.0);
  CHECK_THROWS(gaussian_kernel(4, 1.0));
  CHECK_THROWS(gaussian_kernel(1, 1.0));
  CHECK_THROWS(gaussian_kernel(3, 0.0));
}

TEST_CASE("convolution matches explicit symmetric padding") {
  const Image a = random_image(23, 17, 3);
  for (std::size_t size : {3u, 7u, 15u}) {
    const Kernel h = random_kernel(size, size);
    const Image ours = convolve(a, h);
    const Image ref = padded_convolution(a, h);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(ours.values()[i] - ref.values()[i]) < 1e-13);
  }
  // Odd-symmetric kernel: shift by one pixel.
  std::vector<double> v(9, 0.0);
  v[1 * 3 + 2] = 1.0;  // h(+1, 0)
  const Image s = convolve(a, Kernel(3, v));
  CHECK(s(5, 4) == a(4, 4));
  CHECK(s(0, 4) == a(0, 4));  // reflection duplicates the edge sample
}

TEST_CASE("convolution adjoint identity") {
  for (auto [nx, ny, size] : {std::tuple{23u, 17u, 3u}, {40u, 31u, 7u}, {16u, 20u, 15u}, {9u, 8u, 15u}}) {
    const Image a = random_image(nx, ny, 11 + size, -1, 1);
    const Image b = random_image(nx, ny, 29 + size, -1, 1);
    const Kernel h = random_kernel(size, 7 * size);
    const long double lhs = dot(convolve(a, h), b);
    const long double rhs = dot(a, convolve_adjoint(b, h));
    CHECK(std::abs(static_cast<double>(lhs - rhs)) < 1e-10 * std::max(1.0, std::abs(static_cast<double>(lhs))));
  }
}

TEST_CASE("convolution is identical across thread counts") {
  const Image a = random_image(37, 29, 5);
  const Kernel h = random_kernel(7, 8);
  const Image c1 = convolve(a, h, 1), c3 = convolve(a, h, 3);
  const Image t1 = convolve_adjoint(a, h, 1), t3 = convolve_adjoint(a, h, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(c1.values()[i] == c3.values()[i]);
    CHECK(t1.values()[i] == t3.values()[i]);
  }
}

TEST_CASE("lucy-richardson invariants") {
  const IntensityImage obs(random_image(32, 24, 41, 0.0, 2.0));
  SUBCASE("delta kernel is a fixed point") {
    const IntensityImage out = lucy_richardson(obs, delta_kernel(7), 25);
    for (std::size_t i = 0; i < obs.size(); ++i) CHECK(std::abs(out.values()[i] - obs.values()[i]) < 1e-12);
  }
  SUBCASE("zero iterations leave the input") {
    const IntensityImage out = lucy_richardson(obs, gaussian_kernel(5, 1.0), 0);
    CHECK(std::equal(out.values().begin(), out.values().end(), obs.values().begin()));
  }
  SUBCASE("flux and nonnegativity") {
    const Kernel h = random_kernel(7, 99);
    const double flux = obs.sum();
    Image u = obs;
    for (int it = 0; it < 100; ++it) {
      u = lucy_richardson_step(u, obs, h);
      for (double v : u.values()) REQUIRE(v >= 0.0);
      REQUIRE(std::abs(u.sum() - flux) < 1e-6 * flux);
    }
  }
  SUBCASE("negative input rejected") {
    IntensityImage bad(4, 4, 1.0);
    bad(1, 1) = -1.0;
    CHECK_THROWS(lucy_richardson(bad, delta_kernel(3), 1));
  }
}

TEST_CASE("tv objective and non-blind step") {
  const Image a = random_image(20, 16, 2);
  const Kernel h = gaussian_kernel(5, 1.0);
  const Image b = convolve(a, h);
  double tv = 0;
  for (std::size_t y = 0; y < a.ny(); ++y)
    for (std::size_t x = 0; x < a.nx(); ++x) {
      if (x + 1 < a.nx()) tv += std::abs(a(x + 1, y) - a(x, y));
      if (y + 1 < a.ny()) tv += std::abs(a(x, y + 1) - a(x, y));
    }
  CHECK(tv_objective(a, h, b, 0.5) == doctest::Approx(0.5 * tv).epsilon(1e-12));
  CHECK(tv_objective(a, delta_kernel(3), a, 0.0) == 0.0);

  // The primal-dual iterations decrease the objective from the observation.
  const double before = tv_objective(b, h, b, 0.01);
  const Image u = tv_l1_deconvolve(b, h, 0.01, 300);
  CHECK(tv_objective(u, h, b, 0.01) < before);
  for (double v : u.values()) CHECK(v >= 0.0);
  CHECK_THROWS(tv_l1_deconvolve(b, h, -1.0, 10));
}

TEST_CASE("bilinear resampling") {
  const Image a = random_image(9, 7, 4);
  const Image same = resample_bilinear(a, 9, 7);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(same.values()[i] == doctest::Approx(a.values()[i]));
  Image ramp(5, 3);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 5; ++x) ramp(x, y) = 2.0 * x + y;
  const Image up = resample_bilinear(ramp, 9, 5);
  CHECK(up(8, 4) == doctest::Approx(10.0));
  CHECK(up(1, 1) == doctest::Approx(1.0 + 0.5));
}

TEST_CASE("kernel centring and rms") {
  std::vector<double> v(25, 0.0);
  v[0 * 5 + 4] = 1.0;  // mass at (+2, -2)
  const Kernel c = center_kernel(Kernel(5, v));
  CHECK(c.at(0, 0) == 1.0);
  const Kernel g = gaussian_kernel(7, 1.284);
  CHECK(kernel_rms_error(g, g) == 0.0);
  // Delta against the Gaussian over 49 taps.
  double ss = 0;
  for (int y = -3; y <= 3; ++y)
    for (int x = -3; x <= 3; ++x) {
      const double d = (x == 0 && y == 0 ? 1.0 : 0.0) - g.at(x, y);
      ss += d * d;
    }
  CHECK(kernel_rms_error(delta_kernel(7), g) == doctest::Approx(std::sqrt(ss / 49)));
  // Smaller kernels are zero-extended to the larger support.
  CHECK(kernel_rms_error(delta_kernel(3), delta_kernel(7)) == 0.0);
}

TEST_CASE("disk image is seeded") {
  const Image a = make_disk_image(64, 48, 30, 1), b = make_disk_image(64, 48, 30, 1);
  const Image c = make_disk_image(64, 48, 30, 2);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  for (double v : a.values()) CHECK((v == 1.0 || v == 0.5 || v == 0.04));
}

TEST_CASE("blind tv on a sharp image keeps a near-delta kernel") {
  const IntensityImage sharp(make_disk_image(96, 96, 40, 1));
  BlindTvOptions o;
  o.kernel_size = 7;
  const BlindTvResult r = blind_tv_deconvolve(sharp, o);
  CHECK(r.kernel.size() == 7);
  CHECK(center_mass(r.kernel) >= 0.9);
  for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1]);
}

TEST_CASE("blind tv recovers a gaussian blur") {
  const Image truth = make_disk_image(96, 96, 40, 1);
  const Kernel kt = gaussian_kernel(7, 1.284);
  const IntensityImage blurred(convolve(truth, kt));
  BlindTvOptions o;
  o.kernel_size = 7;
  const BlindTvResult r = blind_tv_deconvolve(blurred, o);
  const double rms = kernel_rms_error(r.kernel, kt);
  MESSAGE("kernel rms " << rms << ", steps accepted " << r.objective.size() - 1);
  CHECK(rms < 0.05);
  CHECK(l2_distance(r.image, truth) < l2_distance(blurred, truth));
  for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] <= r.objective[i - 1]);
  CHECK(r.lambda == doctest::Approx(2e-3 * blurred.max()));
}

TEST_CASE("blind tv with a huge lambda flattens the image") {
  const Image truth = make_disk_image(48, 48, 20, 3);
  const IntensityImage blurred(convolve(truth, gaussian_kernel(5, 1.0)));
  BlindTvOptions o;
  o.kernel_size = 5;
  o.lambda = 1e6;
  o.scales = 1;
  o.alternations = 2;
  o.refinements = 1;
  o.final_iters = 4000;
  const BlindTvResult r = blind_tv_deconvolve(blurred, o);
  const double mx = r.image.max();
  double mn = mx;
  for (double v : r.image.values()) mn = std::min(mn, v);
  double range_in = blurred.max();
  for (double v : blurred.values()) range_in = std::min(range_in, v);
  range_in = blurred.max() - range_in;
  CHECK(mx - mn < 0.05 * range_in);
}

TEST_CASE("extracted kernel contract") {
  const IntensityImage img(make_disk_image(48, 48, 20, 5));
  BlindTvOptions o;
  o.kernel_size = 9;
  o.scales = 2;
  o.alternations = 3;
  o.refinements = 1;
  const BlindTvResult r = blind_tv_deconvolve(img, o);
  const Kernel k = extract_kernel(r);
  CHECK(k.size() == 9);
  CHECK(std::abs(k.sum() - 1.0) < 1e-9);
  for (double v : k.values()) CHECK(v >= 0.0);
  const Kernel again = Kernel(k.size(), std::vector<double>(k.values().begin(), k.values().end()));
  for (std::size_t i = 0; i < k.values().size(); ++i) CHECK(again.values()[i] == doctest::Approx(k.values()[i]).epsilon(1e-15));
}

TEST_CASE("blind tv argument checks") {
  const IntensityImage img(16, 16, 1.0);
  BlindTvOptions o;
  o.kernel_size = 4;
  CHECK_THROWS(blind_tv_deconvolve(img, o));
  o.kernel_size = 41;
  CHECK_THROWS(blind_tv_deconvolve(img, o));
  o.kernel_size = 5;
  o.lambda = 0.0;
  CHECK_THROWS(blind_tv_deconvolve(img, o));
}
