#pragma once

// Review datasets: ingestion from JSON lines, per-user/per-item indices,
// seeded train/val/test splits and leave-one-out generator examples.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace revshill::corpus {

struct Review {
  std::string review_id;
  std::string user_id;
  std::string item_id;
  int rating = 0;
  std::string text;
  std::vector<int> tokens;  // filled by text::tokenize_corpus
};

// Maps the logical review fields onto the keys of a dataset dump.
struct SchemaMap {
  std::string user = "reviewerID";
  std::string item = "asin";
  std::string rating = "overall";
  std::string text = "reviewText";
  std::string review_id;  // optional; line number is used when empty

  static SchemaMap amazon() { return {}; }
  static SchemaMap yelp() { return {"user_id", "business_id", "stars", "text", "review_id"}; }
};

struct IngestStats {
  std::size_t lines = 0;
  std::size_t kept = 0;
  std::size_t dropped_rating = 0;
  std::size_t dropped_text = 0;
  std::size_t dropped_missing_field = 0;
  std::size_t duplicates_replaced = 0;
};

// Immutable after construction. Review indices refer to positions in reviews().
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Review> reviews);

  const std::vector<Review>& reviews() const { return reviews_; }
  const Review& review(std::size_t index) const { return reviews_.at(index); }
  std::size_t size() const { return reviews_.size(); }
  bool empty() const { return reviews_.empty(); }

  std::size_t n_users() const { return user_ids_.size(); }
  std::size_t n_items() const { return item_ids_.size(); }
  // Ids in order of first appearance.
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }

  bool has_user(const std::string& user_id) const { return by_user_.count(user_id) > 0; }
  bool has_item(const std::string& item_id) const { return by_item_.count(item_id) > 0; }
  // Review indices in corpus order (S_u and S_i).
  const std::vector<std::size_t>& by_user(const std::string& user_id) const;
  const std::vector<std::size_t>& by_item(const std::string& item_id) const;
  std::size_t index_of(const std::string& review_id) const;

  Corpus subset(std::span<const std::size_t> indices) const;
  Corpus with_tokens(std::vector<std::vector<int>> tokens) const;

  bool operator==(const Corpus& other) const;

 private:
  std::vector<Review> reviews_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_user_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_item_;
  std::unordered_map<std::string, std::size_t> by_review_id_;
};

struct IngestResult {
  Corpus corpus;
  IngestStats stats;
};

// Reviews with a rating outside {1..5} or blank text are dropped and counted.
// Duplicate (user, item) pairs keep the last occurrence.
IngestResult ingest_jsonl(const std::string& path, const SchemaMap& schema);

// Caps the corpus at `max_reviews`, allocating the budget across items in
// proportion to their size and dropping items whose share falls below
// `min_group_size`.
Corpus subsample_by_item(const Corpus& corpus, std::size_t max_reviews, std::size_t min_group_size, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

// Sizes follow largest-remainder apportionment of the ratios.
Split split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios, std::uint64_t seed);
std::array<std::size_t, 3> apportion(std::size_t total, const std::array<double, 3>& ratios);

struct LooExample {
  std::string item_id;
  std::size_t target_review = 0;
  std::vector<std::size_t> context_reviews;
  std::size_t group_index = 0;
};

std::vector<LooExample> build_loo_examples(const Corpus& corpus, std::span<const std::string> item_ids,
                                           std::size_t min_group_size);

}  // namespace revshill::corpus
