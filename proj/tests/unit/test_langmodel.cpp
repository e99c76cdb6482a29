#include "revshill/langmodel.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace revshill;
using lm::TokenSequence;

namespace {

// Puts probability probs[t] on the observed token at step t (targets are the
// sequence followed by EOS); the rest of the mass is spread uniformly.
class TableScorer final : public lm::TokenScorer {
 public:
  TableScorer(std::size_t v, std::vector<double> probs) : v_(v), probs_(std::move(probs)) {}
  std::size_t vocab_size() const override { return v_; }
  ad::Matrix log_distributions(const TokenSequence& seq) const override {
    const auto n = static_cast<Eigen::Index>(seq.size() + 1);
    ad::Matrix m(n, static_cast<Eigen::Index>(v_));
    for (Eigen::Index t = 0; t < n; ++t) {
      const int target = t < static_cast<Eigen::Index>(seq.size()) ? seq[static_cast<std::size_t>(t)] : text::kEos;
      const double p = probs_.empty() ? 1.0 : probs_[static_cast<std::size_t>(t)];
      const double rest = (1.0 - p) / static_cast<double>(v_ - 1);
      m.row(t).setConstant(rest > 0 ? std::log(rest) : -1e300);
      m(t, target) = std::log(p);
    }
    return m;
  }

 private:
  std::size_t v_;
  std::vector<double> probs_;
};

}  // namespace

TEST_CASE("perplexity of analytic scorers") {
  const TokenSequence seq{5, 6, 7, 8};
  CHECK(lm::perplexity(lm::UniformScorer(40), seq) == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(lm::perplexity(TableScorer(40, {}), seq) == doctest::Approx(1.0));
  // two tokens plus EOS: step probabilities 1/2, 1/4, 1/8
  const double expected = std::exp((std::log(2.0) + std::log(4.0) + std::log(8.0)) / 3.0);
  CHECK(lm::perplexity(TableScorer(40, {0.5, 0.25, 0.125}), TokenSequence{5, 6}) == doctest::Approx(expected));
}

TEST_CASE("inverse perplexity") {
  const TokenSequence seq{5, 6};
  CHECK(lm::inverse_perplexity(TableScorer(40, {}), seq) == doctest::Approx(1.0));
  CHECK(lm::inverse_perplexity(lm::UniformScorer(1000), seq) == doctest::Approx(0.001));
  CHECK(lm::inverse_perplexity(TableScorer(40, {0.6, 0.3, 0.2}), seq) >
        lm::inverse_perplexity(TableScorer(40, {0.5, 0.25, 0.1}), seq));
}

TEST_CASE("language model memorises a repeated sentence") {
  std::vector<corpus::Review> rs;
  for (int k = 0; k < 40; ++k)
    rs.push_back({"r" + std::to_string(k), "u" + std::to_string(k), "i0", 4, "the pan heats fast and evenly", {}});
  const auto t = fixtures::tokenized(rs);
  lm::LmHyper h;
  h.dim = 16;
  h.heads = 2;
  h.layers = 1;
  h.ff_dim = 32;
  h.epochs = 6;
  h.lr = 1e-2;
  lm::AutoregressiveLm model(h, t.vocab.size());
  lm::train_lm(model, t.corpus, t.split);
  const TokenSequence seq(t.corpus.review(0).tokens);
  CHECK(lm::perplexity(model, seq) < 1.3);
}
