#include "revshill/config.hpp"
#include "revshill/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace revshill;
using nlohmann::json;

namespace {

std::string write_config(const std::string& name, const json& j) {
  const auto p = std::filesystem::temp_directory_path() / ("revshill_cfg_" + name + ".json");
  std::ofstream(p) << j.dump();
  return p.string();
}

}  // namespace

TEST_CASE("file overrides defaults") {
  const auto path = write_config("file", {{"seed", 11}, {"rbrs", {{"epochs", 3}}}});
  const auto raw = config::load(path, {});
  CHECK(raw["seed"] == 11);
  CHECK(raw["rbrs"]["epochs"] == 3);
  CHECK(raw["rbrs"]["lr"] == config::defaults()["rbrs"]["lr"]);
}

TEST_CASE("command line overrides file") {
  const auto path = write_config("cli", {{"seed", 11}, {"rbrs", {{"epochs", 3}}}});
  const auto raw = config::load(path, {"rbrs.epochs=9", "arg.mask=PI"});
  CHECK(raw["rbrs"]["epochs"] == 9);
  CHECK(raw["seed"] == 11);
  CHECK(raw["arg"]["mask"] == "PI");
}

TEST_CASE("command line overrides defaults without a file") {
  const auto raw = config::load(std::nullopt, {"eval.q=7"});
  CHECK(raw["eval"]["q"] == 7);
  CHECK(raw["eval"]["max_users"] == config::defaults()["eval"]["max_users"]);
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(config::load(std::nullopt, {"rbrs.no_such_key=1"}), ConfigError);
  CHECK_THROWS_AS(config::load(std::nullopt, {"rbrs.epochs=\"many\""}), ConfigError);
  CHECK_THROWS_AS(config::load(write_config("bad", {{"unknown_section", 1}}), {}), ConfigError);
  CHECK_THROWS_AS(config::load(std::string("/nonexistent/config.json"), {}), ConfigError);
  // an integer may stand in for a float
  CHECK_NOTHROW(config::load(std::nullopt, {"rbrs.lr=1"}));
}

TEST_CASE("section seeds follow the global seed") {
  const auto a = config::ExperimentConfig::from_json(config::load(std::nullopt, {"seed=3"}));
  const auto b = config::ExperimentConfig::from_json(config::load(std::nullopt, {"seed=3"}));
  const auto c = config::ExperimentConfig::from_json(config::load(std::nullopt, {"seed=4"}));
  CHECK(a.rbrs.seed == b.rbrs.seed);
  CHECK(a.rbrs.seed != c.rbrs.seed);
  CHECK(a.rbrs.seed != a.lm.seed);
}

TEST_CASE("invalid attack settings are config errors") {
  CHECK_THROWS_AS(config::ExperimentConfig::from_json(config::load(std::nullopt, {"arg.mask=PX"})), ConfigError);
}
