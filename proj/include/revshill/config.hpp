#pragma once

// Experiment configuration: a JSON document validated against the shape of
// the built-in defaults. Precedence is command line > config file > defaults.

#include "revshill/abae.hpp"
#include "revshill/arg.hpp"
#include "revshill/baselines.hpp"
#include "revshill/corpus.hpp"
#include "revshill/generator.hpp"
#include "revshill/langmodel.hpp"
#include "revshill/rbrs.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace revshill::config {

nlohmann::json defaults();

// Every key must exist in the defaults and keep its JSON type (integers may
// stand in for floating-point values). Throws ConfigError naming the key.
void validate(const nlohmann::json& cfg);

// Overlays `overlay` onto `base`, rejecting keys unknown to `base`.
void merge_into(nlohmann::json& base, const nlohmann::json& overlay, const std::string& where = "");

// "a.b.c=value"; value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

nlohmann::json load(const std::optional<std::string>& path, const std::vector<std::string>& overrides);

struct DataConfig {
  std::string path;
  corpus::SchemaMap schema;
  std::size_t max_reviews = 0;  // 0 keeps everything
  std::size_t min_group_size = 3;
  std::size_t vocab_min_freq = 2;
  std::size_t vocab_max_size = 20000;
};

struct BaselineConfig {
  baselines::TextBuggerOptions textbugger;
  baselines::HotFlipOptions hotflip;
  std::size_t users_per_attack = 32;
};

struct EvalSection {
  std::size_t q = 0;  // 0: min(500, number of test items)
  std::size_t max_users = 200;
  std::size_t aspect_top_n = 30;
};

struct AdvTrainConfig {
  std::string augmenter = "arg";
  std::vector<std::string> attackers;
};

struct ExperimentConfig {
  nlohmann::json raw;
  std::uint64_t seed = 1;
  std::string out;
  DataConfig data;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 1;
  rbrs::RbrsHyper rbrs;
  lm::LmHyper lm;
  abae::AbaeHyper abae;
  arg::GeneratorHyper generator;
  arg::AttackConfig arg;
  std::size_t arg_train_items = 0;  // 0: all
  std::size_t arg_val_items = 16;
  std::vector<std::string> ablation_masks;
  BaselineConfig baselines;
  EvalSection eval;
  AdvTrainConfig advtrain;

  // Validates `cfg` first; section seeds are derived from the global seed.
  static ExperimentConfig from_json(const nlohmann::json& cfg);
};

}  // namespace revshill::config
