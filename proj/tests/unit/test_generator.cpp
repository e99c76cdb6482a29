#include "revshill/generator.hpp"

#include "revshill/toy_corpus.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace revshill;
using arg::TokenSequence;

namespace {

arg::GeneratorHyper tiny(std::uint64_t seed) {
  arg::GeneratorHyper h;
  h.dim = 16;
  h.heads = 2;
  h.encoder_layers = 1;
  h.decoder_layers = 1;
  h.ff_dim = 32;
  h.max_decode_length = 12;
  h.seed = seed;
  return h;
}

}  // namespace

TEST_CASE("sampling is seeded and never emits padding") {
  arg::GeneratorModel gen(tiny(2), 20);
  const TokenSequence ctx{5, 6, 7, 8, 9};
  const auto a = arg::sample_decode(gen, ctx, 1.0, 9);
  const auto b = arg::sample_decode(gen, ctx, 1.0, 9);
  CHECK(a.tokens == b.tokens);
  CHECK(a.step_log_probs == b.step_log_probs);
  CHECK(arg::greedy_decode(gen, ctx).tokens == arg::greedy_decode(gen, ctx).tokens);
  for (std::uint64_t s = 0; s < 20; ++s)
    for (int t : arg::sample_decode(gen, ctx, 1.0, s).tokens) CHECK(t != text::kPad);
}

TEST_CASE("near-zero temperature sampling is greedy decoding") {
  arg::GeneratorModel gen(tiny(3), 20);
  const TokenSequence ctx{5, 6, 7, 8};
  CHECK(arg::sample_decode(gen, ctx, 1e-6, 4).tokens == arg::greedy_decode(gen, ctx).tokens);
}

TEST_CASE("sampled log-probabilities agree with teacher forcing") {
  arg::GeneratorModel gen(tiny(4), 20);
  const TokenSequence ctx{5, 9, 11, 12};
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto d = arg::sample_decode(gen, ctx, 1.0, s);
    ad::Graph g(false);
    const double tf = gen.sequence_log_prob(g, gen.encode(g, ctx), d.tokens, d.stopped).scalar();
    CHECK(d.total_log_prob() == doctest::Approx(tf).epsilon(1e-6));
  }
}

TEST_CASE("pretraining memorises a single repeated review") {
  std::vector<corpus::Review> rs;
  for (int k = 0; k < 12; ++k)
    rs.push_back({"r" + std::to_string(k), "u" + std::to_string(k), "i0", 5, "sharp knife and a solid pan", {}});
  const auto t = fixtures::tokenized(rs);
  const std::vector<std::string> items{"i0"};
  const auto loo = corpus::build_loo_examples(t.corpus, items, 2);
  auto h = tiny(5);
  h.epochs = 15;
  h.lr = 1e-2;
  const auto examples = arg::make_gen_examples(t.corpus, loo, h);
  arg::GeneratorModel gen(h, t.vocab.size());
  const auto hist = arg::pretrain_loo(gen, examples, examples);
  const TokenSequence review(t.corpus.review(0).tokens);
  CHECK(arg::greedy_decode(gen, examples[0].context).tokens == review);
  CHECK(hist.best_val_nll < std::log(static_cast<double>(t.vocab.size())));
}

TEST_CASE("pretraining beats the uniform baseline and prefers real text to shuffled text") {
  toy::ToyOptions opt;
  opt.users = 40;
  opt.items = 8;
  opt.reviews_per_user = 4;
  const auto t = fixtures::tokenized(toy::make_toy_reviews(opt));
  std::vector<std::string> items;
  for (const auto& i : t.corpus.item_ids()) items.push_back(i);
  const auto loo = corpus::build_loo_examples(t.corpus, items, 3);
  auto h = tiny(6);
  h.epochs = 3;
  const auto examples = arg::make_gen_examples(t.corpus, loo, h);
  const std::span<const arg::GenExample> all(examples);
  arg::GeneratorModel gen(h, t.vocab.size());
  arg::pretrain_loo(gen, all.subspan(0, 120), all.subspan(120));
  CHECK(arg::mean_token_nll(gen, all.subspan(120)) < std::log(static_cast<double>(t.vocab.size())));

  // held-out reviews vs the same tokens in reverse order
  double real = 0.0, shuffled = 0.0;
  for (std::size_t k = 120; k < examples.size(); ++k) {
    auto rev = examples[k].target.ids();
    std::reverse(rev.begin(), rev.end());
    ad::Graph g(false);
    real += gen.teacher_forced_nll(g, examples[k].context, examples[k].target).scalar();
    shuffled += gen.teacher_forced_nll(g, examples[k].context, TokenSequence(rev)).scalar();
  }
  CHECK(real < shuffled);
}
