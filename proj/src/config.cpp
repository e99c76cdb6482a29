#include "revshill/config.hpp"
#include "revshill/errors.hpp"
#include "revshill/random.hpp"

#include <fstream>

namespace revshill::config {

using nlohmann::json;

namespace {

json without_seed(json j) {
  j.erase("seed");
  return j;
}

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

bool compatible(const json& def, const json& v) {
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  return def.type() == v.type();
}

void check(const json& def, const json& v, const std::string& where) {
  if (!compatible(def, v)) throw ConfigError("config key '" + where + "' has the wrong type (expected " +
                                             std::string(def.type_name()) + ", got " + v.type_name() + ")");
  if (v.is_object()) {
    for (const auto& [key, value] : v.items()) {
      if (!def.contains(key)) throw ConfigError("unknown config key '" + join(where, key) + "'");
      check(def.at(key), value, join(where, key));
    }
  } else if (v.is_array() && !def.empty()) {
    for (std::size_t k = 0; k < v.size(); ++k) check(def.front(), v[k], where + "[" + std::to_string(k) + "]");
  }
}

}  // namespace

json defaults() {
  const corpus::SchemaMap schema = corpus::SchemaMap::amazon();
  arg::AttackConfig attack;
  json arg_section = without_seed(attack.to_json());
  arg_section["mask"] = "PIRA";
  arg_section["train_items"] = 0;
  arg_section["val_items"] = 16;
  arg_section["ablation_masks"] = {"P", "PI", "PIR", "PIRA"};
  const baselines::TextBuggerOptions tb;
  const baselines::HotFlipOptions hf;
  return {
      {"seed", 1},
      {"out", "runs/default"},
      {"data",
       {{"path", "data/toy/reviews.jsonl"},
        {"schema_map",
         {{"user", schema.user}, {"item", schema.item}, {"rating", schema.rating}, {"text", schema.text},
          {"review_id", schema.review_id}}},
        {"max_reviews", 0},
        {"min_group_size", 3},
        {"vocab_min_freq", 2},
        {"vocab_max_size", 20000}}},
      {"split", {{"ratios", {0.8, 0.1, 0.1}}, {"seed", 1}}},
      {"rbrs", without_seed(rbrs::RbrsHyper{}.to_json())},
      {"lm", without_seed(lm::LmHyper{}.to_json())},
      {"abae", without_seed(abae::AbaeHyper{}.to_json())},
      {"generator", without_seed(arg::GeneratorHyper{}.to_json())},
      {"arg", arg_section},
      {"baselines",
       {{"users_per_attack", 32},
        {"textbugger", {{"budget", tb.budget}, {"query_budget", tb.query_budget}}},
        {"hotflip",
         {{"max_flips", hf.max_flips},
          {"candidate_pool", hf.candidate_pool},
          {"min_cosine", hf.min_cosine},
          {"exact_checks", hf.exact_checks}}}}},
      {"eval", {{"q", 0}, {"max_users", 200}, {"aspect_top_n", 30}}},
      {"advtrain", {{"augmenter", "arg"}, {"attackers", {"copycat", "arg"}}}},
  };
}

void validate(const json& cfg) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  check(defaults(), cfg, "");
}

void merge_into(json& base, const json& overlay, const std::string& where) {
  if (!overlay.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string path = join(where, key);
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (base[key].is_object() && value.is_object())
      merge_into(base[key], value, path);
    else
      base[key] = value;
  }
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (!compatible(*node, value) && node->is_string()) value = text;  // e.g. --set out=123
  *node = value;
}

json load(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
  json cfg = defaults();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + *path);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ConfigError("config file " + *path + " is not valid JSON");
    validate(file);
    merge_into(cfg, file);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  validate(cfg);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const json& cfg) {
  validate(cfg);
  json full = defaults();
  merge_into(full, cfg);
  ExperimentConfig c;
  c.raw = full;
  c.seed = full.at("seed").get<std::uint64_t>();
  c.out = full.at("out").get<std::string>();

  const json& d = full.at("data");
  c.data.path = d.at("path").get<std::string>();
  const json& sm = d.at("schema_map");
  c.data.schema = {sm.at("user").get<std::string>(), sm.at("item").get<std::string>(),
                   sm.at("rating").get<std::string>(), sm.at("text").get<std::string>(),
                   sm.at("review_id").get<std::string>()};
  c.data.max_reviews = d.at("max_reviews").get<std::size_t>();
  c.data.min_group_size = d.at("min_group_size").get<std::size_t>();
  c.data.vocab_min_freq = d.at("vocab_min_freq").get<std::size_t>();
  c.data.vocab_max_size = d.at("vocab_max_size").get<std::size_t>();
  if (c.data.min_group_size < 2) throw ConfigError("data.min_group_size must be at least 2");

  const auto ratios = full.at("split").at("ratios").get<std::vector<double>>();
  if (ratios.size() != 3) throw ConfigError("split.ratios must have three entries");
  double sum = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    if (ratios[k] < 0.0) throw ConfigError("split.ratios must be non-negative");
    c.split_ratios[k] = ratios[k];
    sum += ratios[k];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split.ratios must sum to 1");
  c.split_seed = full.at("split").at("seed").get<std::uint64_t>();

  c.rbrs = rbrs::RbrsHyper::from_json(full.at("rbrs"));
  c.rbrs.seed = derive_seed(c.seed, "rbrs");
  if (c.rbrs.kind != "deepconn" && c.rbrs.kind != "attention_id")
    throw ConfigError("rbrs.kind must be deepconn or attention_id");
  c.lm = lm::LmHyper::from_json(full.at("lm"));
  c.lm.seed = derive_seed(c.seed, "lm");
  c.abae = abae::AbaeHyper::from_json(full.at("abae"));
  c.abae.seed = derive_seed(c.seed, "abae");
  if (c.abae.aspects < 1) throw ConfigError("abae.aspects must be at least 1");
  c.generator = arg::GeneratorHyper::from_json(full.at("generator"));
  c.generator.seed = derive_seed(c.seed, "generator");
  if (c.generator.max_decode_length < 1 || c.generator.max_decode_length > text::kMaxSequenceLength)
    throw ConfigError("generator.max_decode_length must lie in [1, 128]");

  json a = full.at("arg");
  c.arg_train_items = a.at("train_items").get<std::size_t>();
  c.arg_val_items = a.at("val_items").get<std::size_t>();
  c.ablation_masks = a.at("ablation_masks").get<std::vector<std::string>>();
  for (const auto& m : c.ablation_masks) arg::RewardMask::parse(m);
  a.erase("train_items");
  a.erase("val_items");
  a.erase("ablation_masks");
  c.arg = arg::AttackConfig::from_json(a);
  c.arg.seed = derive_seed(c.seed, "arg");

  const json& b = full.at("baselines");
  c.baselines.users_per_attack = b.at("users_per_attack").get<std::size_t>();
  c.baselines.textbugger.budget = b.at("textbugger").at("budget").get<std::size_t>();
  c.baselines.textbugger.query_budget = b.at("textbugger").at("query_budget").get<std::uint64_t>();
  const json& h = b.at("hotflip");
  c.baselines.hotflip.max_flips = h.at("max_flips").get<std::size_t>();
  c.baselines.hotflip.candidate_pool = h.at("candidate_pool").get<std::size_t>();
  c.baselines.hotflip.min_cosine = h.at("min_cosine").get<double>();
  c.baselines.hotflip.exact_checks = h.at("exact_checks").get<std::size_t>();

  const json& e = full.at("eval");
  c.eval.q = e.at("q").get<std::size_t>();
  c.eval.max_users = e.at("max_users").get<std::size_t>();
  c.eval.aspect_top_n = e.at("aspect_top_n").get<std::size_t>();
  if (c.eval.max_users < 1) throw ConfigError("eval.max_users must be at least 1");

  const json& at = full.at("advtrain");
  c.advtrain.augmenter = at.at("augmenter").get<std::string>();
  c.advtrain.attackers = at.at("attackers").get<std::vector<std::string>>();
  static const std::vector<std::string> kKnown = {"none", "copycat", "textbugger", "hotflip", "arg"};
  auto known = [](const std::string& n) { return std::find(kKnown.begin(), kKnown.end(), n) != kKnown.end(); };
  if (!known(c.advtrain.augmenter)) throw ConfigError("advtrain.augmenter is not a known attacker: " + c.advtrain.augmenter);
  for (const auto& n : c.advtrain.attackers)
    if (!known(n)) throw ConfigError("advtrain.attackers lists an unknown attacker: " + n);
  return c;
}

}  // namespace revshill::config
