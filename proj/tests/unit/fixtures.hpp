#pragma once

#include "revshill/corpus.hpp"
#include "revshill/random.hpp"
#include "revshill/textproc.hpp"

#include <string>
#include <vector>

namespace fixtures {

// Two disjoint topic vocabularies; item i belongs to topic i % 2.
inline const std::vector<std::string> kTopicA{"pan", "knife", "oven", "kettle", "spoon", "lid"};
inline const std::vector<std::string> kTopicB{"cable", "speaker", "amp", "jack", "volume", "bass"};

inline std::vector<revshill::corpus::Review> two_topic_reviews(int n, std::uint64_t seed) {
  auto rng = revshill::make_rng(seed, "two-topic");
  std::vector<revshill::corpus::Review> out;
  for (int k = 0; k < n; ++k) {
    const auto& words = k % 2 == 0 ? kTopicA : kTopicB;
    std::string text;
    for (int w = 0; w < 8; ++w) text += words[revshill::uniform_index(rng, words.size())] + " ";
    out.push_back({"r" + std::to_string(k), "u" + std::to_string(k % 17), "i" + std::to_string(k % 6),
                   1 + k % 5, text, {}});
  }
  return out;
}

struct Tokenized {
  revshill::text::Vocabulary vocab;
  revshill::corpus::Corpus corpus;
  revshill::corpus::Split split;
};

inline Tokenized tokenized(const std::vector<revshill::corpus::Review>& reviews, std::uint64_t seed = 1) {
  Tokenized t;
  revshill::corpus::Corpus raw(reviews);
  std::vector<std::string> texts;
  for (const auto& r : reviews) texts.push_back(r.text);
  t.vocab = revshill::text::build_vocab(texts, 1, 10000);
  t.corpus = revshill::text::tokenize_corpus(raw, t.vocab);
  t.split = revshill::corpus::split_corpus(t.corpus, {0.8, 0.1, 0.1}, seed);
  return t;
}

}  // namespace fixtures

#include "revshill/rbrs.hpp"

namespace fixtures {

// Linear bag-of-words recommender over a small random corpus: the shift caused
// by an injected review is the sum of its token weights.
struct BowWorld {
  revshill::text::Vocabulary vocab;
  revshill::corpus::Corpus corpus;
  revshill::rbrs::ReviewHistory history;
  std::shared_ptr<revshill::rbrs::BagOfWordsModel> model;
  std::unique_ptr<revshill::rbrs::BlackBoxRecommender> blackbox;
};

inline revshill::ad::Matrix random_matrix(Eigen::Index r, Eigen::Index c, revshill::Rng& rng) {
  revshill::ad::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = 2.0 * revshill::uniform01(rng) - 1.0;
  return m;
}

inline BowWorld bow_world(std::uint64_t seed, int items = 3) {
  auto rng = revshill::make_rng(seed, "bow-world");
  BowWorld w;
  for (int k = 0; k < 30; ++k) w.vocab.add("w" + std::to_string(k));
  std::vector<revshill::corpus::Review> reviews;
  for (int u = 0; u < 8; ++u)
    for (int i = 0; i < items; ++i) {
      if ((u + i) % 3 == 0) continue;
      std::string text;
      for (std::size_t k = 0; k < 6 + revshill::uniform_index(rng, 6); ++k)
        text += "w" + std::to_string(revshill::uniform_index(rng, 30)) + " ";
      reviews.push_back({"r" + std::to_string(reviews.size()), "u" + std::to_string(u), "i" + std::to_string(i),
                         1 + static_cast<int>(revshill::uniform_index(rng, 5)), text, {}});
    }
  w.corpus = revshill::text::tokenize_corpus(revshill::corpus::Corpus(reviews), w.vocab);
  std::vector<std::size_t> all(w.corpus.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  w.history = revshill::rbrs::ReviewHistory::from_corpus(w.corpus, all);
  w.model = std::make_shared<revshill::rbrs::BagOfWordsModel>(
      random_matrix(static_cast<Eigen::Index>(w.vocab.size()), 4, rng), random_matrix(4, 1, rng), 3.0);
  w.blackbox = revshill::rbrs::black_box(w.model);
  return w;
}

}  // namespace fixtures
