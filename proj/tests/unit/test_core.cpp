#include <doctest.h>

#include <cmath>
#include <set>

#include "thz/core.hpp"

using namespace thz;

TEST_CASE("depth per sample follows c / 2B") {
  AcquisitionConfig cfg;
  CHECK(depth_per_sample(cfg) == doctest::Approx(1189.6526).epsilon(1e-7));

  cfg.f_start_hz = 1.0;
  cfg.f_end_hz = 1.0 + kSpeedOfLight / 2.0;
  CHECK(depth_per_sample(cfg) == doctest::Approx(1e6).epsilon(1e-12));

  AcquisitionConfig override_cfg;
  override_cfg.depth_per_sample_um = 1210.0;
  CHECK(depth_per_sample(override_cfg) == 1210.0);
}

TEST_CASE("depth per sample decreases with bandwidth") {
  AcquisitionConfig cfg;
  double prev = INFINITY;
  for (double b : {10e9, 50e9, 126e9, 300e9}) {
    cfg.f_end_hz = cfg.f_start_hz + b;
    const double d = depth_per_sample(cfg);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("default carrier is the Dirichlet phase slope") {
  AcquisitionConfig cfg;
  CHECK(cfg.padded_length() == 12600);
  CHECK(cfg.omega() == doctest::Approx(kPi * 1399.0 / 12600.0).epsilon(1e-15));
  CHECK(cfg.omega() == doctest::Approx(0.3489).epsilon(1e-3));
  cfg.carrier_omega = 0.25;
  CHECK(cfg.omega() == 0.25);
}

TEST_CASE("config validation") {
  AcquisitionConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.f_end_hz = bad.f_start_hz;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.n_freq = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.pad_factor = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.f_start_hz = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("volume index is a bijection") {
  ComplexVolume vol(3, 4, 5, Domain::Frequency);
  std::set<std::size_t> seen;
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t z = 0; z < 5; ++z) {
        const auto i = vol.index(x, y, z);
        CHECK(i < 60);
        seen.insert(i);
      }
  CHECK(seen.size() == 60);

  vol.at(2, 3, 4) = {1.0, -2.0};
  CHECK(vol.pixel(2, 3)[4] == cdouble(1.0, -2.0));
  CHECK(vol.pixel(3 * 3 + 2)[4] == cdouble(1.0, -2.0));
}

TEST_CASE("volume rejects mismatched sample counts") {
  CHECK_THROWS_AS(ComplexVolume(2, 2, 2, Domain::Spatial, std::vector<cdouble>(7)), DataError);
  CHECK_THROWS_AS(Image(2, 2, std::vector<double>(3)), DataError);
}

TEST_CASE("intensity images must be finite and nonnegative") {
  CHECK_NOTHROW(IntensityImage(2, 1, std::vector<double>{0.0, 4.0}));
  CHECK_THROWS_AS(IntensityImage(2, 1, std::vector<double>{-1.0, 4.0}), DataError);
  CHECK_THROWS_AS(IntensityImage(2, 1, std::vector<double>{NAN, 4.0}), DataError);
}

TEST_CASE("depth maps use a NaN sentinel for invalid pixels") {
  DepthMap m(2, 2);
  CHECK(std::isnan(m.depth_um(1, 1)));
  CHECK_FALSE(m.is_valid(1, 1));
}

TEST_CASE("phase wrapping lands in [-pi, pi)") {
  CHECK(wrap_phase(kPi) == doctest::Approx(-kPi));
  CHECK(wrap_phase(-kPi) == doctest::Approx(-kPi));
  CHECK(wrap_phase(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(wrap_phase(0.7 + 8 * kPi) == doctest::Approx(0.7));
  for (double p = -20.0; p < 20.0; p += 0.37) {
    const double w = wrap_phase(p);
    CHECK(w >= -kPi);
    CHECK(w < kPi);
    CHECK(std::remainder(w - p, 2 * kPi) == doctest::Approx(0.0).epsilon(1e-12));
  }
}
