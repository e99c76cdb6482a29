#pragma once

// Comparison attackers: Copycat (verbatim five-star copy), a black-box
// TextBugger-style character perturbation and a white-box HotFlip-style
// word substitution.

#include "revshill/arg.hpp"
#include "revshill/rbrs.hpp"
#include "revshill/textproc.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace revshill::baselines {

using text::TokenSequence;

struct Edit {
  std::size_t position = 0;
  std::string kind;  // replace | insert | delete | swap | visual | split
  std::string old_word;
  std::string new_word;
};

struct AttackResult {
  std::string item_id;
  std::string source;  // copycat | textbugger | hotflip | arg
  std::vector<std::string> words;
  TokenSequence attack_review;
  std::uint64_t queries_used = 0;
  std::vector<Edit> edits;
  bool fallback = false;  // copycat found no five-star review
  double ps = 0.0;        // attacker-side estimate, where one was computed

  nlohmann::json to_json(const text::Vocabulary& vocab) const;
};

// Uniformly random five-star review among `item_reviews` (corpus indices);
// falls back to the highest-rated one with a warning.
AttackResult copycat(const corpus::Corpus& corpus, std::span<const std::size_t> item_reviews,
                     const std::string& item_id, std::uint64_t seed, const text::Vocabulary& vocab);

// Closed-class plus suffix/context heuristics; one class per token id.
class PosTagger {
 public:
  static PosTagger fit(const text::Vocabulary& vocab, std::span<const TokenSequence> sentences);
  const std::string& tag(int token) const;
  std::size_t size() const { return tags_.size(); }

 private:
  std::vector<std::string> tags_;
};

std::string heuristic_tag(const std::string& word);

struct TextBuggerOptions {
  std::size_t budget = 5;               // accepted edits
  std::uint64_t query_budget = 20000;   // black-box predictions
};

// The five character bugs of a word, each within edit distance 2.
std::vector<std::pair<std::string, std::string>> character_bugs(const std::string& word);
int edit_distance(const std::string& a, const std::string& b);

// Deletion importance of each word: PS(without the word) - PS(with it).
std::vector<double> deletion_importance(const rbrs::BlackBoxRecommender& blackbox, const arg::ItemContext& item,
                                        std::span<const rbrs::UserQuery> users, const text::Vocabulary& vocab,
                                        const std::vector<std::string>& words);

double mean_shift(const rbrs::BlackBoxRecommender& blackbox, const arg::ItemContext& item,
                  std::span<const rbrs::UserQuery> users, const TokenSequence& attack);

AttackResult textbugger(const rbrs::BlackBoxRecommender& blackbox, const arg::ItemContext& item,
                        std::span<const rbrs::UserQuery> users, const AttackResult& seed_review,
                        const text::Vocabulary& vocab, const TextBuggerOptions& options = {});

struct HotFlipOptions {
  std::size_t max_flips = 2;
  std::size_t candidate_pool = 50;
  double min_cosine = 0.2;
  std::size_t exact_checks = 8;  // first-order candidates re-evaluated exactly per flip
};

// Nearest same-class neighbours of `token` by embedding cosine.
std::vector<int> hotflip_candidates(const ad::Matrix& embeddings, const PosTagger& tagger, int token,
                                    const HotFlipOptions& options);

AttackResult hotflip(std::shared_ptr<const rbrs::RbrsModel> model, const arg::ItemContext& item,
                     std::span<const rbrs::UserQuery> users, const AttackResult& seed_review,
                     const text::Vocabulary& vocab, const PosTagger& tagger, const HotFlipOptions& options = {});

}  // namespace revshill::baselines
