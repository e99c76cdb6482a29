#include "revshill/arg.hpp"
#include "revshill/langmodel.hpp"

#include "fixtures.hpp"

#include <doctest.h>

using namespace revshill;
using arg::TokenSequence;

namespace {

arg::GeneratorHyper tiny(std::uint64_t seed) {
  arg::GeneratorHyper h;
  h.dim = 8;
  h.heads = 2;
  h.encoder_layers = 1;
  h.decoder_layers = 1;
  h.ff_dim = 16;
  h.max_decode_length = 8;
  h.seed = seed;
  return h;
}

std::vector<rbrs::UserQuery> users_of(const fixtures::BowWorld& w, const std::string& item) {
  std::vector<rbrs::UserQuery> out;
  for (const auto& u : arg::eligible_users(w.corpus, item)) out.push_back({u, &w.history.user_reviews(u), ""});
  return out;
}

arg::DecodeResult nonempty_sample(const arg::GeneratorModel& gen, const TokenSequence& ctx, std::uint64_t base) {
  arg::DecodeResult d;
  for (std::uint64_t s = base; d.tokens.empty(); ++s) d = arg::sample_decode(gen, ctx, 1.0, s);
  return d;
}

double logp(const arg::GeneratorModel& gen, const TokenSequence& ctx, const arg::DecodeResult& d) {
  ad::Graph g(false);
  return gen.sequence_log_prob(g, gen.encode(g, ctx), d.tokens, d.stopped).scalar();
}

void sgd_step(arg::GeneratorModel& gen, const TokenSequence& ctx, const arg::DecodeResult& d, double advantage) {
  const auto greedy = arg::greedy_decode(gen, ctx);
  gen.parameters().zero_grad();
  ad::Graph g;
  g.backward(arg::scst_loss(g, gen, gen.encode(g, ctx), d, greedy, arg::RewardBundle(advantage, 0, 0),
                            arg::RewardBundle(0, 0, 0)));
  for (ad::Parameter* p : gen.parameters().trainable()) p->value -= 1e-3 * p->grad;
}

}  // namespace

TEST_CASE("reward masks") {
  CHECK(arg::RewardMask::parse("PIR").name() == "PIR");
  const auto p = arg::RewardMask::parse("P");
  CHECK(p.ps);
  CHECK_FALSE(p.inv_ppl);
  CHECK_FALSE(p.relevance);
  CHECK_FALSE(p.aspect);
  CHECK_THROWS(arg::RewardMask::parse("PX"));
}

TEST_CASE("reward bundle total") {
  const arg::RewardBundle r(0.25, 0.5, 0.125);
  CHECK(r.total == 0.875);
}

TEST_CASE("eligible users exclude the item's reviewers") {
  const auto w = fixtures::bow_world(1);
  for (const auto& u : arg::eligible_users(w.corpus, "i0"))
    for (std::size_t idx : w.corpus.by_user(u)) CHECK(w.corpus.review(idx).item_id != "i0");
}

TEST_CASE("rewards on trivial reviews") {
  const auto w = fixtures::bow_world(2);
  const auto ctx = arg::make_item_context("i0", w.history, arg::GeneratorHyper{});
  const auto users = users_of(w, "i0");
  lm::UniformScorer uniform(w.vocab.size());
  const auto none = arg::compute_rewards(TokenSequence{}, ctx, users, *w.blackbox, uniform, arg::AttackConfig{});
  CHECK(none.measured.ps == 0.0);

  // relevance of a copy of the only historical review
  std::vector<corpus::Review> rs{{"a", "u0", "solo", 5, "w1 w2 w3", {}}, {"b", "u1", "other", 3, "w4 w5", {}}};
  const auto c = text::tokenize_corpus(corpus::Corpus(rs), w.vocab);
  const std::vector<std::size_t> idx{0, 1};
  const auto hist = rbrs::ReviewHistory::from_corpus(c, idx);
  const auto solo = arg::make_item_context("solo", hist, arg::GeneratorHyper{});
  const std::vector<rbrs::UserQuery> one{{"u1", &hist.user_reviews("u1"), ""}};
  const auto copy = arg::compute_rewards(TokenSequence(c.review(0).tokens), solo, one, *w.blackbox, uniform,
                                         arg::AttackConfig{});
  CHECK(copy.measured.relevance == doctest::Approx(1.0));
}

TEST_CASE("prediction-shift reward matches the bag-of-words closed form") {
  const auto w = fixtures::bow_world(3);
  const auto ctx = arg::make_item_context("i1", w.history, arg::GeneratorHyper{});
  lm::UniformScorer uniform(w.vocab.size());
  const TokenSequence review{5, 9, 9, 17, 30};
  double closed = 0.0;
  for (int t : review) closed += w.model->token_weight(t);
  const auto out = arg::compute_rewards(review, ctx, users_of(w, "i1"), *w.blackbox, uniform, arg::AttackConfig{});
  CHECK(out.measured.ps == doctest::Approx(closed).epsilon(1e-12));
}

TEST_CASE("equal rewards give zero loss and zero gradient") {
  arg::GeneratorModel gen(tiny(1), 16);
  const TokenSequence ctx{5, 6, 7, 8};
  const auto d = nonempty_sample(gen, ctx, 0);
  const arg::RewardBundle r(0.3, 0.1, 0.2);
  gen.parameters().zero_grad();
  ad::Graph g;
  const auto loss = arg::scst_loss(g, gen, gen.encode(g, ctx), d, arg::greedy_decode(gen, ctx), r, r);
  CHECK(loss.scalar() == 0.0);
  g.backward(loss);
  for (const auto& p : gen.parameters().all()) CHECK(p->grad.isZero(0.0));
}

TEST_CASE("advantage sign moves the sampled log-likelihood") {
  int up = 0, down = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TokenSequence ctx{5, 6, 7, 8, static_cast<int>(9 + seed % 5)};
    arg::GeneratorModel a(tiny(seed + 10), 16), b(tiny(seed + 10), 16);
    const auto d = nonempty_sample(a, ctx, seed * 100);
    const double before = logp(a, ctx, d);
    sgd_step(a, ctx, d, 1.0);
    sgd_step(b, ctx, d, -1.0);
    up += logp(a, ctx, d) > before;
    down += logp(b, ctx, d) < before;
  }
  CHECK(up >= 9);
  CHECK(down >= 9);
}

TEST_CASE("lambda = 1 drops the aspect term") {
  const std::size_t V = 16;
  arg::GeneratorModel gen(tiny(2), V);
  auto rng = make_rng(2, "aspect");
  abae::AbaeHyper ah;
  ah.aspects = 3;
  ah.embed_dim = 4;
  abae::AspectModel aspects(ah, fixtures::random_matrix(static_cast<Eigen::Index>(V), 4, rng));
  const TokenSequence ctx{5, 6, 7};
  const auto d = nonempty_sample(gen, ctx, 0);
  const auto greedy = arg::greedy_decode(gen, ctx);
  const arg::RewardBundle rs(0.5, 0, 0), rg(0.1, 0, 0);
  auto grads = [&](bool with_aspect) {
    gen.parameters().zero_grad();
    ad::Graph g;
    auto mem = gen.encode(g, ctx);
    auto l = arg::scst_loss(g, gen, mem, d, greedy, rs, rg);
    if (with_aspect)
      l = arg::total_loss(l, arg::relaxed_aspect_loss(g, gen, mem, d.tokens, aspects,
                                                      abae::AspectDistribution({0.2, 0.3, 0.5})),
                          1.0);
    g.backward(l);
    std::vector<ad::Matrix> out;
    for (const auto& p : gen.parameters().all()) out.push_back(p->grad);
    return out;
  };
  const auto a = grads(false), b = grads(true);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].isApprox(b[k], 1e-12));
}
