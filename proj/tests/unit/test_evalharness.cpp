#include "revshill/evalharness.hpp"
#include "revshill/toy_corpus.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <numeric>
#include <set>

using namespace revshill;

namespace {

rbrs::RbrsHyper small() {
  rbrs::RbrsHyper h;
  h.embed_dim = 8;
  h.filters = 8;
  h.latent_dim = 4;
  h.fm_factors = 2;
  h.epochs = 3;
  h.seed = 2;
  return h;
}

struct World {
  fixtures::Tokenized data;
  rbrs::ReviewHistory history;
  std::unordered_map<std::string, std::vector<std::size_t>> item_train;
  std::shared_ptr<rbrs::RbrsModel> model;
  std::unique_ptr<rbrs::BlackBoxRecommender> blackbox;
  eval::AttackEnv env;
  std::vector<std::string> items;
  lm::UniformScorer lm{1};
  std::unordered_set<int> aspect_words;

  std::unique_ptr<rbrs::RbrsModel> fresh() const {
    return rbrs::make_rbrs(small(), data.vocab.size(), data.corpus, data.split.train);
  }
};

const World& world() {
  static const World w = [] {
    World w;
    auto reviews = toy::make_separable_reviews(40, 8, 5, 3);
    // a five-star review with extra words so copies differ from the item's mean
    for (auto& r : reviews)
      if (r.rating == 5 && r.user_id == "u0001") r.text = "good good good item";
    w.data = fixtures::tokenized(reviews, 3);
    w.history = rbrs::ReviewHistory::from_corpus(w.data.corpus, w.data.split.train);
    w.item_train = eval::item_reviews_in(w.data.corpus, w.data.split.train);
    w.model = w.fresh();
    rbrs::train_rbrs(*w.model, w.data.corpus, w.data.split, w.history);
    w.blackbox = rbrs::black_box(w.model);
    w.env = {&w.data.corpus, &w.history, &w.item_train, w.model, w.blackbox.get(), &w.data.vocab, 8, 1};
    for (const auto& [item, _] : w.item_train) w.items.push_back(item);
    std::sort(w.items.begin(), w.items.end());
    w.lm = lm::UniformScorer(w.data.vocab.size());
    w.aspect_words = {w.data.vocab.id("good")};
    return w;
  }();
  return w;
}

eval::EvalConfig cfg() {
  eval::EvalConfig c;
  c.max_users = 10;
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("no-op attacker shifts nothing") {
  const auto& w = world();
  const auto rep = eval::evaluate_attack(eval::NoOpAttacker(), w.env, w.items, w.lm, w.aspect_words, cfg());
  CHECK(rep.q() == w.items.size());
  CHECK(rep.aggregates.ps == 0.0);
  for (const auto& it : rep.items) {
    CHECK(it.ps == 0.0);
    CHECK_FALSE(it.ppl.has_value());
  }
}

TEST_CASE("prediction shift decomposes into per-user shifts") {
  const auto& w = world();
  const auto digest = w.model->parameters().digest();
  const auto rep = eval::evaluate_attack(eval::CopycatAttacker(), w.env, w.items, w.lm, w.aspect_words, cfg());
  CHECK(w.model->parameters().digest() == digest);
  REQUIRE_FALSE(rep.items.empty());
  double total = 0.0;
  for (const auto& it : rep.items) {
    // independent recomputation through a fresh black box
    const auto users = eval::evaluation_users(w.data.corpus, it.item_id, cfg());
    REQUIRE(users.size() == it.n_users);
    std::vector<rbrs::UserQuery> q;
    for (const auto& u : users) q.push_back({u, &w.history.user_reviews(u), ""});
    rbrs::BlackBoxRecommender bb(w.model);
    const auto tokens = text::tokenize(w.data.vocab, it.attack_text);
    const auto shifts = bb.prediction_shifts(q, it.item_id, w.history.item_reviews(it.item_id), tokens);
    double clipped = 0.0, raw = 0.0;
    for (const auto& s : shifts) {
      clipped += rbrs::clip_rating(s.attacked) - rbrs::clip_rating(s.base);
      raw += s.attacked - s.base;
    }
    CHECK(it.ps == doctest::Approx(clipped / shifts.size()).epsilon(1e-12));
    CHECK(it.ps_unclipped == doctest::Approx(raw / shifts.size()).epsilon(1e-12));
    CHECK(it.ps == doctest::Approx(std::accumulate(it.user_shifts.begin(), it.user_shifts.end(), 0.0) /
                                   it.user_shifts.size()));
    CHECK(it.ppl.value() == doctest::Approx(static_cast<double>(w.data.vocab.size())));
    total += it.ps;
  }
  CHECK(rep.aggregates.ps == doctest::Approx(total / rep.items.size()));
  CHECK(rep.to_json().dump() ==
        eval::evaluate_attack(eval::CopycatAttacker(), w.env, w.items, w.lm, w.aspect_words, cfg()).to_json().dump());
}

TEST_CASE("evaluation users") {
  const auto& w = world();
  const auto item = w.items[0];
  const auto users = eval::evaluation_users(w.data.corpus, item, cfg());
  CHECK(users.size() == 10);
  CHECK(std::is_sorted(users.begin(), users.end()));
  for (const auto& u : users)
    for (std::size_t idx : w.data.corpus.by_user(u)) CHECK(w.data.corpus.review(idx).item_id != item);
  CHECK(users == eval::evaluation_users(w.data.corpus, item, cfg()));
}

TEST_CASE("human reference uses held-out reviews only") {
  const auto& w = world();
  const auto h = eval::human_reference_metrics(w.data.corpus, w.data.split, w.history, w.lm, w.aspect_words);
  CHECK(h.reviews == w.data.split.test.size());
  std::set<std::string> train_ids;
  for (std::size_t i : w.data.split.train) train_ids.insert(w.data.corpus.review(i).review_id);
  for (const auto& id : h.review_ids) CHECK(train_ids.count(id) == 0);
  CHECK(h.ppl == doctest::Approx(static_cast<double>(w.data.vocab.size())));
}

TEST_CASE("adversarial training with empty reviews changes nothing") {
  const auto& w = world();
  eval::AdvTrainSetup s;
  s.corpus = &w.data.corpus;
  s.split = &w.data.split;
  s.history = &w.history;
  s.factory = [&w] { return w.fresh(); };
  s.pre_model = w.model;
  s.env = w.env;
  s.train_items = w.items;
  s.eval_items = w.items;
  s.lm = &w.lm;
  s.aspect_words = &w.aspect_words;
  s.eval = cfg();
  const eval::CopycatAttacker copycat;
  std::shared_ptr<const rbrs::RbrsModel> post;
  const auto r = eval::adversarial_train(s, eval::NoOpAttacker(), {&copycat}, &post);
  CHECK(r.augmented_items == 0);
  CHECK(r.post_mse == r.pre_mse);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].post_ps == r.rows[0].pre_ps);
  CHECK(post->parameters().digest() == w.model->parameters().digest());
}

TEST_CASE("report rendering") {
  const auto& w = world();
  const auto rep = eval::evaluate_attack(eval::CopycatAttacker(), w.env, w.items, w.lm, w.aspect_words, cfg());
  const auto table = eval::render_table({rep}, nullptr);
  CHECK(table.find("copycat") != std::string::npos);
  CHECK(eval::render_csv({rep}).find("copycat") != std::string::npos);
  const auto j = rep.to_json();
  CHECK(j.at("q") == rep.q());
  CHECK(j.at("items").size() == rep.items.size());
}
