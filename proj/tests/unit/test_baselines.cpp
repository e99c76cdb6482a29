#include "revshill/arg.hpp"
#include "revshill/baselines.hpp"

#include "fixtures.hpp"

#include <doctest.h>

using namespace revshill;
using baselines::TokenSequence;

namespace {

std::vector<rbrs::UserQuery> users_of(const fixtures::BowWorld& w, const std::string& item) {
  std::vector<rbrs::UserQuery> out;
  for (const auto& u : arg::eligible_users(w.corpus, item)) out.push_back({u, &w.history.user_reviews(u), ""});
  return out;
}

corpus::Corpus rated(const std::vector<int>& ratings) {
  std::vector<corpus::Review> rs;
  for (std::size_t k = 0; k < ratings.size(); ++k)
    rs.push_back({"r" + std::to_string(k), "u" + std::to_string(k), "i0", ratings[k], "w" + std::to_string(k), {}});
  return corpus::Corpus(rs);
}

// One-dimensional embeddings: every word weighs +0.5 except `negative`, which
// weighs -1; UNK weighs nothing.
fixtures::BowWorld one_negative(const std::string& negative) {
  auto w = fixtures::bow_world(4);
  ad::Matrix e = ad::Matrix::Constant(static_cast<Eigen::Index>(w.vocab.size()), 1, 0.5);
  e(text::kUnk, 0) = 0.0;
  e(w.vocab.id(negative), 0) = -1.0;
  w.model = std::make_shared<rbrs::BagOfWordsModel>(e, ad::Matrix::Ones(1, 1), 3.0);
  w.blackbox = rbrs::black_box(w.model);
  return w;
}

}  // namespace

TEST_CASE("copycat") {
  const auto w = fixtures::bow_world(1);
  const std::vector<std::size_t> one{0};
  const auto single = baselines::copycat(rated({5}), one, "i0", 1, w.vocab);
  CHECK(single.words == std::vector<std::string>{"w0"});
  CHECK_FALSE(single.fallback);

  const std::vector<std::size_t> all{0, 1, 2, 3};
  const auto c = rated({5, 2, 5, 5});
  CHECK(baselines::copycat(c, all, "i0", 9, w.vocab).words == baselines::copycat(c, all, "i0", 9, w.vocab).words);

  const auto three = baselines::copycat(rated({3, 1, 2}), std::vector<std::size_t>{0, 1, 2}, "i0", 1, w.vocab);
  CHECK(three.fallback);
  CHECK(three.words == std::vector<std::string>{"w0"});
}

TEST_CASE("character bugs stay within edit distance two") {
  CHECK(baselines::edit_distance("kitten", "sitting") == 3);
  CHECK(baselines::edit_distance("", "abc") == 3);
  for (const std::string word : {"speaker", "pan", "go", "excellent"}) {
    const auto bugs = baselines::character_bugs(word);
    CHECK_FALSE(bugs.empty());
    for (const auto& [kind, bugged] : bugs) {
      CHECK(bugged != word);
      CHECK(baselines::edit_distance(word, bugged) <= 2);
    }
  }
}

TEST_CASE("textbugger") {
  const auto w = one_negative("w7");
  const auto ctx = arg::make_item_context("i0", w.history, arg::GeneratorHyper{});
  const auto users = users_of(w, "i0");
  baselines::AttackResult seed;
  seed.words = {"w1", "w2", "w7", "w3"};
  seed.attack_review = text::tokenize_words(w.vocab, seed.words);

  SUBCASE("zero budget leaves the seed") {
    baselines::TextBuggerOptions opt;
    opt.budget = 0;
    const auto r = baselines::textbugger(*w.blackbox, ctx, users, seed, w.vocab, opt);
    CHECK(r.attack_review == seed.attack_review);
    CHECK(baselines::mean_shift(*w.blackbox, ctx, users, r.attack_review) ==
          baselines::mean_shift(*w.blackbox, ctx, users, seed.attack_review));
  }
  SUBCASE("the only negative word is bugged first") {
    const auto imp = baselines::deletion_importance(*w.blackbox, ctx, users, w.vocab, seed.words);
    CHECK(std::max_element(imp.begin(), imp.end()) - imp.begin() == 2);
    const auto r = baselines::textbugger(*w.blackbox, ctx, users, seed, w.vocab);
    REQUIRE_FALSE(r.edits.empty());
    CHECK(r.edits[0].old_word == "w7");
    for (const auto& e : r.edits)
      if (e.kind != "replace") CHECK(baselines::edit_distance(e.old_word, e.new_word) <= 2);
  }
  SUBCASE("query budget is honoured") {
    baselines::TextBuggerOptions opt;
    opt.query_budget = 50;
    const auto r = baselines::textbugger(*w.blackbox, ctx, users, seed, w.vocab, opt);
    CHECK(r.queries_used <= 50 + 2 * users.size());
  }
}

TEST_CASE("hotflip") {
  const auto w = fixtures::bow_world(6);
  const auto ctx = arg::make_item_context("i1", w.history, arg::GeneratorHyper{});
  const auto users = users_of(w, "i1");
  std::vector<TokenSequence> sentences;
  for (const auto& r : w.corpus.reviews()) sentences.emplace_back(r.tokens);
  const auto tagger = baselines::PosTagger::fit(w.vocab, sentences);
  baselines::AttackResult seed;
  seed.attack_review = TokenSequence{5, 8, 13, 21, 30, 9};

  baselines::HotFlipOptions none;
  none.max_flips = 0;
  CHECK(baselines::hotflip(w.model, ctx, users, seed, w.vocab, tagger, none).attack_review == seed.attack_review);

  // PS never decreases as flips accumulate
  double last = baselines::mean_shift(*w.blackbox, ctx, users, seed.attack_review);
  for (std::size_t flips = 1; flips <= 4; ++flips) {
    baselines::HotFlipOptions opt;
    opt.max_flips = flips;
    opt.min_cosine = -1.0;
    const auto r = baselines::hotflip(w.model, ctx, users, seed, w.vocab, tagger, opt);
    CHECK(r.edits.size() <= flips);
    CHECK(r.ps >= last - 1e-12);
    last = r.ps;
  }

  baselines::HotFlipOptions opt;
  for (int c : baselines::hotflip_candidates(w.model->word_embeddings(), tagger, 9, opt)) {
    CHECK(tagger.tag(c) == tagger.tag(9));
    const auto& e = w.model->word_embeddings();
    CHECK(e.row(c).dot(e.row(9)) / (e.row(c).norm() * e.row(9).norm()) >= opt.min_cosine);
  }
}
