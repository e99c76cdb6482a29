#pragma once

// Word-level tokenisation shared by every model, plus the text metrics:
// ROUGE-1 and the percentage of aspect words.

#include "revshill/corpus.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace revshill::text {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecial = 4;
inline constexpr std::size_t kMaxSequenceLength = 128;

inline bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

// A review (or generated review) as token ids, without BOS/EOS markers.
class TokenSequence {
 public:
  TokenSequence() = default;
  explicit TokenSequence(std::vector<int> ids) : ids_(std::move(ids)) {}
  TokenSequence(std::initializer_list<int> ids) : ids_(ids) {}

  const std::vector<int>& ids() const { return ids_; }
  std::vector<int>& ids() { return ids_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  int operator[](std::size_t i) const { return ids_[i]; }
  auto begin() const { return ids_.begin(); }
  auto end() const { return ids_.end(); }
  void push_back(int id) { ids_.push_back(id); }

  bool operator==(const TokenSequence&) const = default;

 private:
  std::vector<int> ids_;
};

class Vocabulary {
 public:
  static constexpr int kFormatVersion = 1;

  Vocabulary();

  int id(std::string_view token) const;  // kUnk when absent
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  std::string hash() const;

  // Appends a content token; returns its id (existing id if already present).
  int add(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Lower-cases, separates punctuation into its own tokens and splits on whitespace.
std::vector<std::string> split_words(std::string_view text);

// Tokens with frequency >= min_freq, most frequent first with lexicographic
// tie-break, at most max_size content tokens.
Vocabulary build_vocab(std::span<const std::string> texts, std::size_t min_freq, std::size_t max_size);
Vocabulary build_vocab(const corpus::Corpus& corpus, std::span<const std::size_t> review_indices,
                       std::size_t min_freq, std::size_t max_size);

// Truncates to max_length tokens.
TokenSequence tokenize(const Vocabulary& vocab, std::string_view text, std::size_t max_length = kMaxSequenceLength);
TokenSequence tokenize_words(const Vocabulary& vocab, std::span<const std::string> words,
                             std::size_t max_length = kMaxSequenceLength);
std::string detokenize(const Vocabulary& vocab, const TokenSequence& seq);
std::vector<std::string> to_words(const Vocabulary& vocab, const TokenSequence& seq);

corpus::Corpus tokenize_corpus(const corpus::Corpus& corpus, const Vocabulary& vocab);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Unigram overlap with clipped counts. UNK never matches anything: two
// unknown tokens are not known to be the same word.
RougeScore rouge1(const TokenSequence& candidate, const TokenSequence& reference);

// Mean ROUGE-1 F1 of `candidate` against every reference.
double mean_rouge1_f1(const TokenSequence& candidate, std::span<const TokenSequence> references);

// Fraction of review tokens (with multiplicity) that are aspect words.
double aspect_word_percentage(const TokenSequence& review, const std::unordered_set<int>& aspect_words);

}  // namespace revshill::text
