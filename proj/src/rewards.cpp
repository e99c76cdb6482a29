#include "revshill/arg.hpp"
#include "revshill/errors.hpp"

#include <algorithm>
#include <unordered_set>

namespace revshill::arg {

RewardMask RewardMask::parse(const std::string& spec) {
  if (spec == "P") return {true, false, false, false};
  if (spec == "PI") return {true, true, false, false};
  if (spec == "PIR") return {true, true, true, false};
  if (spec == "PIRA") return {true, true, true, true};
  throw ConfigError("rewards mask must be one of P, PI, PIR, PIRA (got '" + spec + "')");
}

std::string RewardMask::name() const {
  std::string s;
  if (ps) s += 'P';
  if (inv_ppl) s += 'I';
  if (relevance) s += 'R';
  if (aspect) s += 'A';
  return s;
}

nlohmann::json AttackConfig::to_json() const {
  return {{"lambda", lambda},   {"users_per_reward", users_per_reward}, {"mask", mask.name()},
          {"temperature", temperature}, {"demote", demote},           {"seed", seed},
          {"epochs", epochs},   {"lr", lr},                             {"batch_items", batch_items}};
}

AttackConfig AttackConfig::from_json(const nlohmann::json& j) {
  AttackConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.users_per_reward = j.value("users_per_reward", c.users_per_reward);
  if (j.contains("mask")) c.mask = RewardMask::parse(j.at("mask").get<std::string>());
  c.temperature = j.value("temperature", c.temperature);
  c.demote = j.value("demote", c.demote);
  c.seed = j.value("seed", c.seed);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.batch_items = j.value("batch_items", c.batch_items);
  c.validate();
  return c;
}

void AttackConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("arg.lambda must lie in [0,1]");
  if (users_per_reward < 1) throw ConfigError("arg.users_per_reward must be at least 1");
  if (batch_items < 1) throw ConfigError("arg.batch_items must be at least 1");
}

RewardBundle::RewardBundle(double ps_, double inv_ppl_, double relevance_)
    : ps(ps_), inv_ppl(inv_ppl_), relevance(relevance_), total(ps_ + inv_ppl_ + relevance_) {}

ItemContext make_item_context(const std::string& item_id, const rbrs::ReviewHistory& history,
                              const GeneratorHyper& hyper) {
  ItemContext ctx;
  ctx.item_id = item_id;
  ctx.reviews = &history.item_reviews(item_id);
  for (auto it = ctx.reviews->rbegin(); it != ctx.reviews->rend(); ++it)
    if (!it->tokens.empty()) ctx.review_tokens.push_back(it->tokens);
  ctx.encoder_input = build_context(ctx.review_tokens, hyper.max_context_reviews, hyper.context_budget);
  return ctx;
}

std::vector<std::string> eligible_users(const corpus::Corpus& corpus, const std::string& item_id) {
  std::unordered_set<std::string> raters;
  for (std::size_t i : corpus.by_item(item_id)) raters.insert(corpus.review(i).user_id);
  std::vector<std::string> out;
  for (const auto& u : corpus.user_ids())
    if (!raters.count(u)) out.push_back(u);
  return out;
}

std::vector<rbrs::UserQuery> sample_candidate_users(const corpus::Corpus& corpus, const rbrs::ReviewHistory& history,
                                                    const std::string& item_id, std::size_t n, Rng& rng) {
  auto pool = eligible_users(corpus, item_id);
  if (pool.empty()) throw DataError("no candidate users without a review of item " + item_id);
  if (pool.size() > n) {
    shuffle(pool.begin(), pool.end(), rng);
    pool.resize(n);
  }
  std::vector<rbrs::UserQuery> out;
  out.reserve(pool.size());
  for (auto& u : pool) out.push_back({u, &history.user_reviews(u), ""});
  return out;
}

RewardOutcome compute_rewards(const TokenSequence& review, const ItemContext& item,
                              std::span<const rbrs::UserQuery> users, const rbrs::BlackBoxRecommender& blackbox,
                              const lm::TokenScorer& lm, const AttackConfig& config) {
  if (item.review_tokens.empty()) throw DataError("item " + item.item_id + " has no historical review");
  if (users.empty()) throw DataError("no candidate users for item " + item.item_id);
  double ps = 0.0;
  if (!review.empty()) {
    const auto shifts = blackbox.prediction_shifts(users, item.item_id, *item.reviews, review);
    for (const auto& s : shifts) ps += s.attacked - s.base;
    ps /= static_cast<double>(shifts.size());
    if (config.demote) ps = -ps;
  }
  const double inv = review.empty() ? 0.0 : lm::inverse_perplexity(lm, review);
  const double rel = review.empty() ? 0.0 : text::mean_rouge1_f1(review, item.review_tokens);
  RewardOutcome out;
  out.measured = RewardBundle(ps, inv, rel);
  out.bundle = RewardBundle(config.mask.ps ? ps : 0.0, config.mask.inv_ppl ? inv : 0.0,
                            config.mask.relevance ? rel : 0.0);
  return out;
}

}  // namespace revshill::arg
