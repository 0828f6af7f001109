#include <doctest.h>

#include "ctsynth/config.hpp"

using namespace ctsynth;

TEST_CASE("config parses sections, comments and types") {
  const Config cfg = Config::parse_string(
      "# comment\n"
      "[mesh]\n"
      "n_points = 12   ; trailing comment\n"
      "lambda_low = 0.5\n"
      "random_rot90 = true\n"
      "\n"
      "[fusion]\n"
      "beta = 0.7\n"
      "generator_cmd = \n");
  CHECK(cfg.require_int("mesh.n_points") == 12);
  CHECK(cfg.require_double("mesh.lambda_low") == doctest::Approx(0.5));
  CHECK(cfg.get_bool("mesh.random_rot90", false));
  CHECK(cfg.get_double("fusion.beta", 0.0) == doctest::Approx(0.7));
  CHECK(cfg.get_string("fusion.generator_cmd", "x").empty());
  CHECK(cfg.get_int("fusion.overlap", 9) == 9);  // fallback
}

TEST_CASE("config missing key names the key") {
  const Config cfg = Config::parse_string("[mesh]\nlambda_low = 1\n");
  try {
    cfg.require("mesh.n_points");
    FAIL("expected ParamError");
  } catch (const ParamError& e) {
    CHECK(std::string(e.what()).find("mesh.n_points") != std::string::npos);
  }
}

TEST_CASE("config rejects malformed lines and values") {
  CHECK_THROWS_AS(Config::parse_string("[mesh\n"), ParamError);
  CHECK_THROWS_AS(Config::parse_string("just words\n"), ParamError);
  const Config cfg = Config::parse_string("[mesh]\nn_points = twelve\n");
  CHECK_THROWS_AS(cfg.require_int("mesh.n_points"), ParamError);
  CHECK_THROWS_AS(cfg.get_bool("mesh.n_points", true), ParamError);
}
