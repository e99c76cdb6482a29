// revshill: train recommenders, train and run attackers, evaluate, harden.

#include "revshill/config.hpp"
#include "revshill/errors.hpp"
#include "revshill/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kMissing = 3, kDiverged = 4 };

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> max_reviews;
  std::optional<std::string> mask;
  std::optional<std::string> attacker;
};

revshill::config::ExperimentConfig build_config(const Options& o) {
  using revshill::config::apply_override;
  std::optional<std::string> path;
  if (!o.config_path.empty()) path = o.config_path;
  auto raw = revshill::config::load(path, o.sets);
  // Dedicated flags are command-line settings too; they win over the file.
  if (o.seed) apply_override(raw, "seed=" + std::to_string(*o.seed));
  if (o.out) raw["out"] = *o.out;
  if (o.max_reviews) apply_override(raw, "data.max_reviews=" + std::to_string(*o.max_reviews));
  if (o.mask) raw["arg"]["mask"] = *o.mask;
  return revshill::config::ExperimentConfig::from_json(raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial review generation against review-based recommenders"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "JSON experiment config");
  app.add_option("--set", o.sets, "Override a config key (key=value, repeatable)");
  app.add_option("--seed", o.seed, "Global seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--max-reviews", o.max_reviews, "Cap on ingested reviews (stratified by item)");
  app.add_option("--rewards-mask", o.mask, "Reward components of the ARG")
      ->check(CLI::IsMember({"P", "PI", "PIR", "PIRA"}));
  app.add_option("--attacker", o.attacker, "Attack method")
      ->check(CLI::IsMember({"copycat", "textbugger", "hotflip", "arg", "none"}));
  app.add_flag_callback("-v,--verbose", [] { spdlog::set_level(spdlog::level::debug); }, "Debug logging");

  std::string command;
  for (const char* name : {"ingest", "train-rbrs", "train-lm", "train-abae", "pretrain-arg", "train-arg", "attack",
                           "eval", "adv-train", "report", "run-all"}) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
    sub->callback([&command, name] { command = name; });
  }
  app.get_subcommand("run-all")->description("Every stage in order, one ARG per ablation mask");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  spdlog::set_pattern("[%l] %v");
  try {
    const auto cfg = build_config(o);
    namespace p = revshill::pipeline;
    if (command == "ingest") p::cmd_ingest(cfg);
    else if (command == "train-rbrs") p::cmd_train_rbrs(cfg);
    else if (command == "train-lm") p::cmd_train_lm(cfg);
    else if (command == "train-abae") p::cmd_train_abae(cfg);
    else if (command == "pretrain-arg") p::cmd_pretrain_arg(cfg);
    else if (command == "train-arg") p::cmd_train_arg(cfg);
    else if (command == "attack") {
      if (!o.attacker) throw revshill::ConfigError("attack needs --attacker");
      p::cmd_attack(cfg, *o.attacker);
    } else if (command == "eval") p::cmd_eval(cfg, o.attacker);
    else if (command == "adv-train") p::cmd_adv_train(cfg);
    else if (command == "report") p::cmd_report(cfg);
    else if (command == "run-all") p::run_all(cfg);
  } catch (const revshill::ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const revshill::MissingPrerequisite& e) {
    spdlog::error("missing prerequisite: {}", e.what());
    return kMissing;
  } catch (const revshill::DivergenceError& e) {
    spdlog::error("training diverged: {}", e.what());
    return kDiverged;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
  return kOk;
}
