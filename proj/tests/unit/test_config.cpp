#include <doctest.h>

#include <cmath>
#include <sstream>

#include "thz/config.hpp"
#include "thz/pipeline.hpp"

using namespace thz;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in, "test");
}

}  // namespace

TEST_CASE("parse, comments and overrides") {
  Config c = parse("# header\n a = 1.5 \n\nb=x, y ,z # tail\nsnr = inf\nz0 = auto\n");
  CHECK(c.get_double("a") == 1.5);
  CHECK(c.get_list("b") == std::vector<std::string>{"x", "y", "z"});
  CHECK(std::isinf(c.get_double("snr")));
  CHECK_FALSE(c.get_auto_double("z0").has_value());
  c.apply_override("a=2");
  CHECK(c.get_double("a") == 2.0);
  CHECK(c.get_or("missing", "d") == "d");
}

TEST_CASE("config errors name the key") {
  CHECK_THROWS_AS(parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("novalue\n"), ConfigError);
  const Config c = parse("n = -3\nf = 1x\nb = maybe\n");
  CHECK_THROWS_WITH_AS(c.get("lambda"), doctest::Contains("lambda"), ConfigError);
  CHECK_THROWS_AS(c.get_size("n"), ConfigError);
  CHECK_THROWS_AS(c.get_double("f"), ConfigError);
  CHECK_THROWS_AS(c.get_bool("b"), ConfigError);
  CHECK_THROWS_WITH_AS(c.check_known({"n", "f"}), doctest::Contains("'b'"), ConfigError);
}

TEST_CASE("pipeline reports the first missing key") {
  Config c = parse("scene = usaf\n");
  CHECK_THROWS_AS(run_pipeline(c), ConfigError);
}

TEST_CASE("acquisition keys") {
  const Config c = parse("n_freq = 700\npad_factor = 4\ndepth_per_sample_um = auto\n");
  const AcquisitionConfig a = acquisition_from(c);
  CHECK(a.n_freq == 700);
  CHECK(a.pad_factor == 4);
  CHECK(intensity_psf_sigma_px(793.7, 262.5) == doctest::Approx(793.7 / (2 * std::sqrt(2 * std::log(2.0))) / 262.5 / std::sqrt(2.0)));
}
