#pragma once

// Rewards and reinforcement learning for the attack review generator.

#include "revshill/abae.hpp"
#include "revshill/generator.hpp"
#include "revshill/langmodel.hpp"
#include "revshill/rbrs.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace revshill::arg {

// Which rewards (P = prediction shift, I = inverse perplexity, R = relevance)
// and whether the aspect loss (A) take part.
struct RewardMask {
  bool ps = true;
  bool inv_ppl = true;
  bool relevance = true;
  bool aspect = true;

  static RewardMask parse(const std::string& spec);  // "P", "PI", "PIR", "PIRA"
  std::string name() const;
};

struct AttackConfig {
  double lambda = 0.5;
  std::size_t users_per_reward = 32;
  RewardMask mask;
  double temperature = 1.0;
  bool demote = false;
  std::uint64_t seed = 1;
  int epochs = 4;
  double lr = 5e-4;
  int batch_items = 4;

  nlohmann::json to_json() const;
  static AttackConfig from_json(const nlohmann::json& j);
  void validate() const;
};

class RewardBundle {
 public:
  RewardBundle() = default;
  RewardBundle(double ps, double inv_ppl, double relevance);

  double ps = 0.0;
  double inv_ppl = 0.0;
  double relevance = 0.0;
  double total = 0.0;
};

// What the attacker knows about one target item.
struct ItemContext {
  std::string item_id;
  const rbrs::ReviewList* reviews = nullptr;  // S_i, oldest first
  std::vector<TokenSequence> review_tokens;    // S_i, most recent first
  TokenSequence encoder_input;
};

ItemContext make_item_context(const std::string& item_id, const rbrs::ReviewHistory& history,
                              const GeneratorHyper& hyper);

// Users with no review of the item anywhere in the corpus, in corpus order.
std::vector<std::string> eligible_users(const corpus::Corpus& corpus, const std::string& item_id);
// Up to n of them drawn without replacement.
std::vector<rbrs::UserQuery> sample_candidate_users(const corpus::Corpus& corpus, const rbrs::ReviewHistory& history,
                                                    const std::string& item_id, std::size_t n, Rng& rng);

// All three measured rewards plus the bundle with disabled ones zeroed.
struct RewardOutcome {
  RewardBundle bundle;
  RewardBundle measured;
};

RewardOutcome compute_rewards(const TokenSequence& review, const ItemContext& item,
                              std::span<const rbrs::UserQuery> users, const rbrs::BlackBoxRecommender& blackbox,
                              const lm::TokenScorer& lm, const AttackConfig& config);

// -(R(S) - R(S*)) * log p(S). Returns an exact zero (no graph path) when the
// advantage is zero.
ad::Var scst_loss(ad::Graph& g, const GeneratorModel& gen, ad::Var memory, const DecodeResult& sampled,
                  const DecodeResult& greedy, const RewardBundle& r_sampled, const RewardBundle& r_greedy,
                  double temperature = 1.0);

// L1 distance between the target distribution and the aspect distribution of
// the expected word embeddings under the generator's output distribution.
ad::Var relaxed_aspect_loss(ad::Graph& g, const GeneratorModel& gen, ad::Var memory, const TokenSequence& tokens,
                            const abae::AspectModel& abae, const abae::AspectDistribution& target,
                            double temperature = 1.0);

// lambda * L_scst + (1 - lambda) * L_aspect.
ad::Var total_loss(ad::Var l_scst, ad::Var l_aspect, double lambda);

struct ArgHistory {
  std::vector<double> val_reward;
  std::vector<double> val_ps;
  int best_epoch = -1;
  double best_val_reward = 0.0;
  std::size_t steps = 0;
  std::size_t skipped = 0;

  nlohmann::json to_json() const;
};

struct ArgTrainingData {
  const corpus::Corpus* corpus = nullptr;
  const rbrs::ReviewHistory* history = nullptr;
  std::vector<std::string> train_items;
  std::vector<std::string> val_items;
};

// Algorithm: per item, sample and greedy decode, reward both, SCST plus the
// aspect loss, Adam step every `batch_items` items; keeps the epoch with the
// best validation reward. One JSON line per step goes to `step_log`.
ArgHistory train_arg(GeneratorModel& gen, const ArgTrainingData& data, const rbrs::BlackBoxRecommender& blackbox,
                     const lm::TokenScorer& lm, const abae::AspectModel& abae, const AttackConfig& config,
                     std::ostream* step_log = nullptr);

}  // namespace revshill::arg
