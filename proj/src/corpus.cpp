#include "revshill/corpus.hpp"

#include "revshill/errors.hpp"
#include "revshill/random.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace revshill::corpus {

namespace {

const std::vector<std::size_t> kNoReviews;

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string as_id(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return v.dump();
}

}  // namespace

Corpus::Corpus(std::vector<Review> reviews) : reviews_(std::move(reviews)) {
  for (std::size_t i = 0; i < reviews_.size(); ++i) {
    const Review& r = reviews_[i];
    if (r.rating < 1 || r.rating > 5) throw DataError("review " + r.review_id + " has rating outside 1..5");
    if (!by_review_id_.emplace(r.review_id, i).second) throw DataError("duplicate review id " + r.review_id);
    auto [uit, new_user] = by_user_.try_emplace(r.user_id);
    if (new_user) user_ids_.push_back(r.user_id);
    uit->second.push_back(i);
    auto [iit, new_item] = by_item_.try_emplace(r.item_id);
    if (new_item) item_ids_.push_back(r.item_id);
    iit->second.push_back(i);
  }
}

const std::vector<std::size_t>& Corpus::by_user(const std::string& user_id) const {
  auto it = by_user_.find(user_id);
  return it == by_user_.end() ? kNoReviews : it->second;
}

const std::vector<std::size_t>& Corpus::by_item(const std::string& item_id) const {
  auto it = by_item_.find(item_id);
  return it == by_item_.end() ? kNoReviews : it->second;
}

std::size_t Corpus::index_of(const std::string& review_id) const {
  auto it = by_review_id_.find(review_id);
  if (it == by_review_id_.end()) throw std::out_of_range("unknown review id " + review_id);
  return it->second;
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Review> out;
  out.reserve(sorted.size());
  for (std::size_t i : sorted) out.push_back(reviews_.at(i));
  return Corpus(std::move(out));
}

Corpus Corpus::with_tokens(std::vector<std::vector<int>> tokens) const {
  if (tokens.size() != reviews_.size()) throw std::invalid_argument("token list count does not match corpus");
  std::vector<Review> out = reviews_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].tokens = std::move(tokens[i]);
  return Corpus(std::move(out));
}

bool Corpus::operator==(const Corpus& other) const {
  if (reviews_.size() != other.reviews_.size()) return false;
  for (std::size_t i = 0; i < reviews_.size(); ++i) {
    const Review& a = reviews_[i];
    const Review& b = other.reviews_[i];
    if (a.review_id != b.review_id || a.user_id != b.user_id || a.item_id != b.item_id || a.rating != b.rating ||
        a.text != b.text || a.tokens != b.tokens)
      return false;
  }
  return true;
}

IngestResult ingest_jsonl(const std::string& path, const SchemaMap& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read review file " + path);
  if (schema.user.empty() || schema.item.empty() || schema.rating.empty() || schema.text.empty())
    throw DataError("schema_map must name user, item, rating and text fields");

  IngestStats stats;
  std::vector<Review> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    ++stats.lines;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(path + ":" + std::to_string(line_no) + ": line is not a JSON object");
    if (!obj.contains(schema.user) || !obj.contains(schema.item) || !obj.contains(schema.rating) ||
        !obj.contains(schema.text)) {
      ++stats.dropped_missing_field;
      continue;
    }
    const auto& rv = obj[schema.rating];
    double rating = rv.is_number() ? rv.get<double>() : std::nan("");
    if (!(rating >= 1.0 && rating <= 5.0) || rating != std::floor(rating)) {
      ++stats.dropped_rating;
      continue;
    }
    std::string text = obj[schema.text].is_string() ? obj[schema.text].get<std::string>() : std::string();
    if (blank(text)) {
      ++stats.dropped_text;
      continue;
    }
    Review r;
    r.review_id = (!schema.review_id.empty() && obj.contains(schema.review_id)) ? as_id(obj[schema.review_id])
                                                                                 : "L" + std::to_string(line_no);
    r.user_id = as_id(obj[schema.user]);
    r.item_id = as_id(obj[schema.item]);
    r.rating = static_cast<int>(rating);
    r.text = std::move(text);
    raw.push_back(std::move(r));
  }
  if (stats.lines > 0 && stats.dropped_missing_field == stats.lines)
    throw DataError("schema_map does not resolve on any line of " + path);

  // Keep the last occurrence of each (user, item) pair.
  std::map<std::pair<std::string, std::string>, std::size_t> last;
  for (std::size_t i = 0; i < raw.size(); ++i) last[{raw[i].user_id, raw[i].item_id}] = i;
  std::vector<Review> kept;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (last[{raw[i].user_id, raw[i].item_id}] != i) {
      ++stats.duplicates_replaced;
      continue;
    }
    kept.push_back(std::move(raw[i]));
  }
  stats.kept = kept.size();
  if (kept.empty()) throw DataError("no reviews survived ingestion of " + path);
  if (stats.dropped_rating + stats.dropped_text + stats.dropped_missing_field > 0)
    spdlog::info("ingest {}: dropped {} bad rating, {} empty text, {} missing fields", path, stats.dropped_rating,
                 stats.dropped_text, stats.dropped_missing_field);
  return {Corpus(std::move(kept)), stats};
}

Corpus subsample_by_item(const Corpus& corpus, std::size_t max_reviews, std::size_t min_group_size,
                         std::uint64_t seed) {
  if (max_reviews == 0 || max_reviews >= corpus.size()) return corpus;
  const double share = static_cast<double>(max_reviews) / static_cast<double>(corpus.size());
  Rng rng = make_rng(seed, "subsample");
  std::vector<std::size_t> keep;
  for (const std::string& item : corpus.item_ids()) {
    const auto& reviews = corpus.by_item(item);
    const auto quota = static_cast<std::size_t>(std::floor(share * static_cast<double>(reviews.size())));
    if (quota < min_group_size) continue;
    std::vector<std::size_t> pool = reviews;
    shuffle(pool.begin(), pool.end(), rng);
    pool.resize(quota);
    keep.insert(keep.end(), pool.begin(), pool.end());
  }
  if (keep.empty()) throw DataError("subsampling left no item with enough reviews");
  return corpus.subset(keep);
}

std::array<std::size_t, 3> apportion(std::size_t total, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = ratios[k] * static_cast<double>(total);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % 3, ++assigned) ++sizes[order[k]];
  return sizes;
}

Split split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || std::any_of(ratios.begin(), ratios.end(), [](double r) { return r < 0.0; }))
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, "split");
  shuffle(order.begin(), order.end(), rng);
  const auto sizes = apportion(order.size(), ratios);
  Split s;
  s.seed = seed;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
               order.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<LooExample> build_loo_examples(const Corpus& corpus, std::span<const std::string> item_ids,
                                           std::size_t min_group_size) {
  if (min_group_size < 2) throw std::invalid_argument("min_group_size must be at least 2");
  std::vector<LooExample> out;
  std::size_t group = 0;
  for (const std::string& item : item_ids) {
    const auto& reviews = corpus.by_item(item);
    if (reviews.size() < min_group_size) continue;
    for (std::size_t held = 0; held < reviews.size(); ++held) {
      LooExample ex;
      ex.item_id = item;
      ex.target_review = reviews[held];
      ex.group_index = group;
      for (std::size_t k = 0; k < reviews.size(); ++k)
        if (k != held) ex.context_reviews.push_back(reviews[k]);
      out.push_back(std::move(ex));
    }
    ++group;
  }
  return out;
}

}  // namespace revshill::corpus
