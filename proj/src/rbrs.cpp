#include "revshill/rbrs.hpp"

#include "revshill/checkpoint.hpp"
#include "revshill/errors.hpp"
#include "revshill/optim.hpp"
#include "revshill/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace revshill::rbrs {

namespace {
const ReviewList kEmptyList;
}

ReviewHistory ReviewHistory::from_corpus(const corpus::Corpus& corpus, std::span<const std::size_t> review_indices) {
  std::vector<std::size_t> sorted(review_indices.begin(), review_indices.end());
  std::sort(sorted.begin(), sorted.end());
  ReviewHistory h;
  for (std::size_t i : sorted) {
    const auto& r = corpus.review(i);
    TokenSequence tokens(r.tokens);
    h.by_user_[r.user_id].push_back({r.review_id, r.item_id, tokens});
    h.by_item_[r.item_id].push_back({r.review_id, r.user_id, std::move(tokens)});
  }
  return h;
}

const ReviewList& ReviewHistory::user_reviews(const std::string& user_id) const {
  auto it = by_user_.find(user_id);
  return it == by_user_.end() ? kEmptyList : it->second;
}

const ReviewList& ReviewHistory::item_reviews(const std::string& item_id) const {
  auto it = by_item_.find(item_id);
  return it == by_item_.end() ? kEmptyList : it->second;
}

void ReviewHistory::append_item_review(const std::string& item_id, HistoricalReview review) {
  by_item_[item_id].push_back(std::move(review));
}

std::vector<const HistoricalReview*> visible_reviews(const ReviewList* reviews, std::size_t cap,
                                                     const std::string& exclude_review_id,
                                                     const HistoricalReview* attack) {
  std::vector<const HistoricalReview*> kept;
  const bool with_attack = attack != nullptr && !attack->tokens.empty();
  if (reviews) {
    for (const auto& r : *reviews) {
      if (!exclude_review_id.empty() && r.review_id == exclude_review_id) continue;
      if (r.tokens.empty()) continue;
      kept.push_back(&r);
    }
  }
  const std::size_t room = with_attack ? (cap == 0 ? 0 : cap - 1) : cap;
  if (kept.size() > room) kept.erase(kept.begin(), kept.end() - static_cast<std::ptrdiff_t>(room));
  if (with_attack && cap > 0) kept.push_back(attack);
  return kept;
}

nlohmann::json RbrsHyper::to_json() const {
  return {{"kind", kind},
          {"embed_dim", embed_dim},
          {"filters", filters},
          {"window", window},
          {"latent_dim", latent_dim},
          {"fm_factors", fm_factors},
          {"id_dim", id_dim},
          {"max_reviews_per_user", max_reviews_per_user},
          {"max_reviews_per_item", max_reviews_per_item},
          {"lr", lr},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"patience", patience},
          {"seed", seed}};
}

RbrsHyper RbrsHyper::from_json(const nlohmann::json& j) {
  RbrsHyper h;
  h.kind = j.value("kind", h.kind);
  h.embed_dim = j.value("embed_dim", h.embed_dim);
  h.filters = j.value("filters", h.filters);
  h.window = j.value("window", h.window);
  h.latent_dim = j.value("latent_dim", h.latent_dim);
  h.fm_factors = j.value("fm_factors", h.fm_factors);
  h.id_dim = j.value("id_dim", h.id_dim);
  h.max_reviews_per_user = j.value("max_reviews_per_user", h.max_reviews_per_user);
  h.max_reviews_per_item = j.value("max_reviews_per_item", h.max_reviews_per_item);
  h.lr = j.value("lr", h.lr);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.patience = j.value("patience", h.patience);
  h.seed = j.value("seed", h.seed);
  return h;
}

nlohmann::json TrainingHistory::to_json() const {
  return {{"train_mse", train_mse}, {"val_mse", val_mse}, {"best_epoch", best_epoch}, {"best_val_mse", best_val_mse}};
}

ad::Var RbrsModel::predict_graph(ad::Graph& g, const UserQuery& user, const ItemQuery& item) const {
  HistoricalReview attack;
  if (item.attack) attack = {"", kAttackerId, *item.attack};
  const bool user_empty =
      visible_reviews(user.reviews, hyper_.max_reviews_per_user, user.exclude_review_id, nullptr).empty();
  const bool item_empty = visible_reviews(item.reviews, hyper_.max_reviews_per_item, item.exclude_review_id,
                                          item.attack ? &attack : nullptr)
                              .empty();
  if (user_empty && item_empty) throw std::invalid_argument("both S_u and S_i are empty; nothing to encode");
  ad::Var u = encode_user(g, user);
  ad::Var i = encode_item(g, item, nullptr);
  return score(g, u, i, user, item);
}

std::vector<double> RbrsModel::predict_users(std::span<const UserQuery> users, const ItemQuery& item) const {
  std::vector<double> out;
  out.reserve(users.size());
  ad::Graph g(false);
  HistoricalReview attack;
  if (item.attack) attack = {"", kAttackerId, *item.attack};
  const bool item_empty = visible_reviews(item.reviews, hyper_.max_reviews_per_item, item.exclude_review_id,
                                          item.attack ? &attack : nullptr)
                              .empty();
  ad::Var item_repr = encode_item(g, item, nullptr);
  for (const auto& user : users) {
    if (item_empty &&
        visible_reviews(user.reviews, hyper_.max_reviews_per_user, user.exclude_review_id, nullptr).empty())
      throw std::invalid_argument("both S_u and S_i are empty; nothing to encode");
    ad::Var u;
    if (serving_cache_) {
      const std::string key = user.user_id + '\x1f' +
                              std::to_string(reinterpret_cast<std::uintptr_t>(user.reviews)) + '\x1f' +
                              user.exclude_review_id;
      auto it = user_cache_.find(key);
      if (it == user_cache_.end()) it = user_cache_.emplace(key, encode_user(g, user).value()).first;
      u = g.constant_ref(it->second);
    } else {
      u = encode_user(g, user);
    }
    out.push_back(score(g, u, item_repr, user, item).scalar());
  }
  return out;
}

void RbrsModel::set_serving_cache(bool on) const {
  serving_cache_ = on;
  user_cache_.clear();
}

double RbrsModel::predict(const UserQuery& user, const ItemQuery& item, bool clip) const {
  ad::Graph g(false);
  const double r = predict_graph(g, user, item).scalar();
  return clip ? clip_rating(r) : r;
}

ad::Matrix RbrsModel::attack_embedding_gradient(std::span<const UserQuery> users, const ItemQuery& item) const {
  if (!item.attack || item.attack->empty()) throw std::invalid_argument("attack_embedding_gradient needs an attack");
  if (users.empty()) throw std::invalid_argument("attack_embedding_gradient needs at least one user");
  // Gradients must not leak into the model's own accumulators.
  ad::ParameterStore& store = const_cast<ad::ParameterStore&>(params_);
  std::vector<bool> frozen;
  for (const auto& p : store.all()) {
    frozen.push_back(p->frozen);
    p->frozen = true;
  }
  ad::Graph g(true);
  ad::Var leaf;
  ad::Var item_repr = encode_item(g, item, &leaf);
  std::vector<ad::Var> preds;
  for (const auto& user : users) preds.push_back(score(g, encode_user(g, user), item_repr, user, item));
  ad::Var total = ad::scale(ad::sum(ad::concat_rows(preds)), 1.0 / static_cast<double>(users.size()));
  ad::Matrix grad;
  if (leaf.valid()) {
    g.backward(total);
    grad = g.grad_of(leaf);
  }
  for (std::size_t k = 0; k < store.all().size(); ++k) store.all()[k]->frozen = frozen[k];
  if (!leaf.valid()) throw std::logic_error("attack review was not visible to the model");
  return grad;
}

std::unique_ptr<RbrsModel> make_rbrs(const RbrsHyper& hyper, std::size_t vocab_size, const corpus::Corpus& corpus,
                                     std::span<const std::size_t> train_reviews) {
  if (hyper.kind == "deepconn") return std::make_unique<DeepConnStyleModel>(hyper, vocab_size);
  if (hyper.kind == "attention_id") {
    std::vector<std::string> users, items;
    std::unordered_map<std::string, bool> su, si;
    std::vector<std::size_t> sorted(train_reviews.begin(), train_reviews.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i : sorted) {
      const auto& r = corpus.review(i);
      if (su.emplace(r.user_id, true).second) users.push_back(r.user_id);
      if (si.emplace(r.item_id, true).second) items.push_back(r.item_id);
    }
    return std::make_unique<AttentionIdModel>(hyper, vocab_size, std::move(users), std::move(items));
  }
  throw ConfigError("unknown recommender kind: " + hyper.kind);
}

namespace {

struct Example {
  UserQuery user;
  ItemQuery item;
  double rating;
};

std::vector<Example> make_examples(const corpus::Corpus& corpus, std::span<const std::size_t> reviews,
                                   const ReviewHistory& history, const RbrsHyper& hyper) {
  std::vector<Example> out;
  out.reserve(reviews.size());
  for (std::size_t i : reviews) {
    const auto& r = corpus.review(i);
    Example ex{{r.user_id, &history.user_reviews(r.user_id), r.review_id},
               {r.item_id, &history.item_reviews(r.item_id), r.review_id, nullptr},
               static_cast<double>(r.rating)};
    const bool user_empty =
        visible_reviews(ex.user.reviews, hyper.max_reviews_per_user, ex.user.exclude_review_id, nullptr).empty();
    const bool item_empty =
        visible_reviews(ex.item.reviews, hyper.max_reviews_per_item, ex.item.exclude_review_id, nullptr).empty();
    if (user_empty && item_empty) continue;
    out.push_back(std::move(ex));
  }
  return out;
}

double examples_mse(const RbrsModel& model, const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  double se = 0.0;
  for (const auto& ex : examples) {
    const double p = model.predict(ex.user, ex.item, true);
    se += (p - ex.rating) * (p - ex.rating);
  }
  return se / static_cast<double>(examples.size());
}

}  // namespace

TrainingHistory train_rbrs(RbrsModel& model, const corpus::Corpus& corpus, const corpus::Split& split,
                           const ReviewHistory& history) {
  model.set_serving_cache(false);
  const RbrsHyper& hyper = model.hyper();
  auto train = make_examples(corpus, split.train, history, hyper);
  auto val = make_examples(corpus, split.val, history, hyper);
  if (train.empty()) throw DataError("recommender training split is empty");
  if (val.empty()) val = train;

  double mean_rating = 0.0;
  for (const auto& ex : train) mean_rating += ex.rating;
  model.set_global_bias(mean_rating / static_cast<double>(train.size()));

  ad::Adam opt({.lr = hyper.lr});
  ad::ParameterStore& params = model.parameters();
  params.zero_grad();
  Rng rng = make_rng(hyper.seed, "rbrs-train");
  TrainingHistory hist;
  hist.best_val_mse = examples_mse(model, val);
  auto best = params.snapshot();
  ad::DivergenceMonitor monitor(hyper.patience, hist.best_val_mse);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(std::max(1, hyper.batch_size));
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    double se = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      ad::Graph g;
      std::vector<ad::Var> errs;
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = train[order[k]];
        ad::Var pred = model.predict_graph(g, ex.user, ex.item);
        errs.push_back(ad::add_scalar(pred, -ex.rating));
      }
      ad::Var e = ad::concat_rows(errs);
      ad::Var loss = ad::scale(ad::sum(ad::square(e)), 1.0 / static_cast<double>(end - start));
      se += loss.scalar() * static_cast<double>(end - start);
      g.backward(loss);
      opt.step(params);
    }
    hist.train_mse.push_back(se / static_cast<double>(train.size()));
    const double v = examples_mse(model, val);
    hist.val_mse.push_back(v);
    spdlog::debug("rbrs epoch {} train_mse {:.4f} val_mse {:.4f}", epoch, hist.train_mse.back(), v);
    if (std::isfinite(v) && (hist.best_epoch < 0 || v < hist.best_val_mse)) {
      hist.best_val_mse = v;
      hist.best_epoch = epoch;
      best = params.snapshot();
    }
    const auto signal = monitor.observe(v);
    if (signal == ad::TrainSignal::kDiverged)
      throw DivergenceError("recommender validation MSE diverged at epoch " + std::to_string(epoch) + " (" +
                            std::to_string(v) + ")");
    if (signal == ad::TrainSignal::kStop) break;
  }
  params.restore(best);
  return hist;
}

double rating_mse(const RbrsModel& model, const corpus::Corpus& corpus, std::span<const std::size_t> reviews,
                  const ReviewHistory& history) {
  return examples_mse(model, make_examples(corpus, reviews, history, model.hyper()));
}

void save_rbrs(const RbrsModel& model, const std::string& stem, const std::string& vocab_hash,
               const TrainingHistory& history) {
  ckpt::Sidecar s;
  s.kind = model.kind();
  s.hyper = model.hyper().to_json();
  s.vocab_hash = vocab_hash;
  s.seed = model.hyper().seed;
  s.history = history.to_json();
  s.extra = model.extra_state();
  ckpt::save(stem, model.parameters(), s);
}

std::unique_ptr<RbrsModel> load_rbrs(const std::string& stem, const text::Vocabulary& vocab) {
  const auto s = ckpt::read_sidecar(stem);
  ckpt::require_vocab(s, vocab.hash(), "recommender checkpoint");
  const RbrsHyper hyper = RbrsHyper::from_json(s.hyper);
  std::unique_ptr<RbrsModel> model;
  if (s.kind == "deepconn") {
    model = std::make_unique<DeepConnStyleModel>(hyper, vocab.size());
  } else if (s.kind == "attention_id") {
    model = std::make_unique<AttentionIdModel>(hyper, vocab.size(),
                                               s.extra.at("user_ids").get<std::vector<std::string>>(),
                                               s.extra.at("item_ids").get<std::vector<std::string>>());
  } else {
    throw DataError("unknown recommender kind in checkpoint: " + s.kind);
  }
  ckpt::load_parameters(model->parameters(), stem + ".bin");
  return model;
}

double BlackBoxRecommender::predict(const std::string& user_id, const std::string& item_id,
                                    const ReviewList& user_reviews, const ReviewList& item_reviews, bool clip) const {
  ++count_;
  return model_->predict({user_id, &user_reviews, ""}, {item_id, &item_reviews, "", nullptr}, clip);
}

double BlackBoxRecommender::predict_with_attack(const std::string& user_id, const std::string& item_id,
                                                const ReviewList& user_reviews, const ReviewList& item_reviews,
                                                const TokenSequence& attack, bool clip) const {
  ++count_;
  return model_->predict({user_id, &user_reviews, ""}, {item_id, &item_reviews, "", &attack}, clip);
}

std::vector<ShiftSample> BlackBoxRecommender::prediction_shifts(std::span<const UserQuery> users,
                                                                const std::string& item_id,
                                                                const ReviewList& item_reviews,
                                                                const TokenSequence& attack) const {
  count_ += 2 * users.size();
  const auto base = model_->predict_users(users, {item_id, &item_reviews, "", nullptr});
  const auto attacked = model_->predict_users(users, {item_id, &item_reviews, "", &attack});
  std::vector<ShiftSample> out;
  out.reserve(users.size());
  for (std::size_t k = 0; k < users.size(); ++k) out.push_back({users[k].user_id, base[k], attacked[k]});
  return out;
}

std::unique_ptr<BlackBoxRecommender> black_box(std::shared_ptr<const RbrsModel> model) {
  return std::make_unique<BlackBoxRecommender>(std::move(model));
}

}  // namespace revshill::rbrs
