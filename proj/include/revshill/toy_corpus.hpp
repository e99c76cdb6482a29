#pragma once

// Synthetic review corpora for CI and tests: a two-topic corpus with graded
// polarity vocabulary, and a trivially separable good/bad fixture.

#include "revshill/corpus.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace revshill::toy {

struct ToyOptions {
  std::size_t users = 200;
  std::size_t items = 100;
  std::size_t reviews_per_user = 10;
  std::uint64_t seed = 7;
};

// Reviews in posting order (oldest first). Ratings follow item quality plus a
// user bias; review text is drawn from polarity-graded templates.
std::vector<corpus::Review> make_toy_reviews(const ToyOptions& options = {});

// Items whose reviews all read "good ..." are rated 5, "bad ..." items 1.
std::vector<corpus::Review> make_separable_reviews(std::size_t users, std::size_t items, std::size_t reviews_per_user,
                                                   std::uint64_t seed);

// Amazon-style keys (reviewerID, asin, overall, reviewText).
void write_jsonl(const std::vector<corpus::Review>& reviews, const std::string& path);

}  // namespace revshill::toy
