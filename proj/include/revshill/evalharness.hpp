#pragma once

// Attack evaluation (prediction shift, perplexity, relevance, aspect-word
// share), the human-written reference row and the adversarial-training
// experiment.

#include "revshill/abae.hpp"
#include "revshill/arg.hpp"
#include "revshill/baselines.hpp"
#include "revshill/generator.hpp"
#include "revshill/langmodel.hpp"
#include "revshill/rbrs.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace revshill::eval {

using baselines::AttackResult;
using text::TokenSequence;

// Everything an attacker may draw on for one recommender.
struct AttackEnv {
  const corpus::Corpus* corpus = nullptr;
  const rbrs::ReviewHistory* history = nullptr;
  // Training-split review indices per item (what Copycat may copy).
  const std::unordered_map<std::string, std::vector<std::size_t>>* item_train_reviews = nullptr;
  std::shared_ptr<const rbrs::RbrsModel> model;           // white-box access (HotFlip only)
  const rbrs::BlackBoxRecommender* blackbox = nullptr;    // black-box access
  const text::Vocabulary* vocab = nullptr;
  std::size_t users_per_attack = 32;
  std::uint64_t seed = 1;
};

std::unordered_map<std::string, std::vector<std::size_t>> item_reviews_in(const corpus::Corpus& corpus,
                                                                          std::span<const std::size_t> indices);

// Seeded U_train users for a black-box attacker working on `item_id`.
std::vector<rbrs::UserQuery> attack_users(const AttackEnv& env, const std::string& item_id);
arg::ItemContext attack_context(const AttackEnv& env, const std::string& item_id,
                                const arg::GeneratorHyper& hyper = {});

class Attacker {
 public:
  virtual ~Attacker() = default;
  virtual std::string name() const = 0;
  virtual AttackResult attack(const std::string& item_id, const AttackEnv& env) const = 0;
};

class NoOpAttacker final : public Attacker {
 public:
  std::string name() const override { return "none"; }
  AttackResult attack(const std::string& item_id, const AttackEnv& env) const override;
};

class CopycatAttacker final : public Attacker {
 public:
  std::string name() const override { return "copycat"; }
  AttackResult attack(const std::string& item_id, const AttackEnv& env) const override;
};

class TextBuggerAttacker final : public Attacker {
 public:
  explicit TextBuggerAttacker(baselines::TextBuggerOptions options = {}) : options_(options) {}
  std::string name() const override { return "textbugger"; }
  AttackResult attack(const std::string& item_id, const AttackEnv& env) const override;

 private:
  baselines::TextBuggerOptions options_;
};

class HotFlipAttacker final : public Attacker {
 public:
  HotFlipAttacker(std::shared_ptr<const baselines::PosTagger> tagger, baselines::HotFlipOptions options = {})
      : tagger_(std::move(tagger)), options_(options) {}
  std::string name() const override { return "hotflip"; }
  AttackResult attack(const std::string& item_id, const AttackEnv& env) const override;

 private:
  std::shared_ptr<const baselines::PosTagger> tagger_;
  baselines::HotFlipOptions options_;
};

class ArgAttacker final : public Attacker {
 public:
  ArgAttacker(std::string label, std::shared_ptr<const arg::GeneratorModel> gen)
      : label_(std::move(label)), gen_(std::move(gen)) {}
  std::string name() const override { return label_; }
  AttackResult attack(const std::string& item_id, const AttackEnv& env) const override;

 private:
  std::string label_;
  std::shared_ptr<const arg::GeneratorModel> gen_;
};

struct EvalConfig {
  std::size_t max_users = 200;
  std::uint64_t seed = 1;
  std::size_t aspect_top_n = 30;

  nlohmann::json to_json() const;
};

struct ItemRecord {
  std::string item_id;
  std::string attack_source;
  std::size_t n_users = 0;
  double ps = 0.0;            // clipped ratings
  double ps_unclipped = 0.0;
  std::optional<double> ppl;  // absent for an empty attack
  double relevance = 0.0;
  double pct_aspect_words = 0.0;
  std::string attack_text;
  std::vector<double> user_shifts;  // clipped, one per candidate user (not serialised)
};

struct SkippedItem {
  std::string item_id;
  std::string reason;
};

struct Aggregates {
  double ps = 0.0;
  double ps_unclipped = 0.0;
  double ppl = 0.0;
  double relevance = 0.0;
  double pct_aspect_words = 0.0;
};

struct EvalReport {
  std::string attacker;
  std::string rbrs;
  std::vector<ItemRecord> items;
  std::vector<SkippedItem> skipped;
  Aggregates aggregates;
  EvalConfig config;

  std::size_t q() const { return items.size(); }
  nlohmann::json to_json() const;
};

Aggregates aggregate(const std::vector<ItemRecord>& items);

// Candidate users U_i: everyone without a rating of the item, capped.
std::vector<std::string> evaluation_users(const corpus::Corpus& corpus, const std::string& item_id,
                                          const EvalConfig& config);

// Runs the attacker on every item against env.model and scores the result.
// Never mutates a model.
EvalReport evaluate_attack(const Attacker& attacker, const AttackEnv& env, std::span<const std::string> item_ids,
                           const lm::TokenScorer& lm, const std::unordered_set<int>& aspect_words,
                           const EvalConfig& config);

struct HumanReference {
  std::size_t reviews = 0;
  double ppl = 0.0;
  double relevance = 0.0;
  double pct_aspect_words = 0.0;
  std::vector<std::string> review_ids;

  nlohmann::json to_json() const;
};

// Metrics of the held-out human reviews; relevance against the item's
// training reviews.
HumanReference human_reference_metrics(const corpus::Corpus& corpus, const corpus::Split& split,
                                       const rbrs::ReviewHistory& history, const lm::TokenScorer& lm,
                                       const std::unordered_set<int>& aspect_words);

struct AdvTrainRow {
  std::string attacker;
  double pre_ps = 0.0;
  double post_ps = 0.0;
  std::optional<double> reduction_pct;
};

struct AdvTrainReport {
  double pre_mse = 0.0;
  double post_mse = 0.0;
  std::size_t augmented_items = 0;
  std::string augment_source;
  std::vector<AdvTrainRow> rows;
  std::vector<EvalReport> pre_reports;
  std::vector<EvalReport> post_reports;

  double mse_change_pct() const { return pre_mse > 0.0 ? 100.0 * (post_mse - pre_mse) / pre_mse : 0.0; }
  nlohmann::json to_json() const;
};

struct AdvTrainSetup {
  const corpus::Corpus* corpus = nullptr;
  const corpus::Split* split = nullptr;
  const rbrs::ReviewHistory* history = nullptr;  // clean training history
  std::function<std::unique_ptr<rbrs::RbrsModel>()> factory;
  std::shared_ptr<const rbrs::RbrsModel> pre_model;
  AttackEnv env;  // model/blackbox fields are filled per phase
  std::vector<std::string> train_items;
  std::vector<std::string> eval_items;
  const lm::TokenScorer* lm = nullptr;
  const std::unordered_set<int>* aspect_words = nullptr;
  EvalConfig eval;
};

// Appends one attack review per training item to S_i, retrains from scratch
// and re-evaluates every attacker against the hardened model (with the
// clean history at serving time).
AdvTrainReport adversarial_train(const AdvTrainSetup& setup, const Attacker& augmenter,
                                 const std::vector<const Attacker*>& attackers,
                                 std::shared_ptr<const rbrs::RbrsModel>* post_model = nullptr);

// Plain-text table with one row per report: PS | PPL | Rel | %AW.
std::string render_table(const std::vector<EvalReport>& reports, const HumanReference* human);
std::string render_csv(const std::vector<EvalReport>& reports);

}  // namespace revshill::eval
