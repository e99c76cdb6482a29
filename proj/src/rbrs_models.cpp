#include "revshill/nn.hpp"
#include "revshill/random.hpp"
#include "revshill/rbrs.hpp"

#include <limits>

namespace revshill::rbrs {

using ad::Graph;
using ad::Matrix;
using ad::Var;

namespace {

// Token ids of the visible reviews, concatenated; the attack (if visible) is
// always the last entry and is reported separately.
struct DocTokens {
  std::vector<int> ids;
  std::vector<int> attack_ids;
  std::vector<std::pair<int, int>> spans;  // (start, length) per review, attack included
  std::vector<std::string> counterparts;
};

DocTokens collect(const std::vector<const HistoricalReview*>& reviews, const HistoricalReview* attack) {
  DocTokens d;
  int offset = 0;
  for (const HistoricalReview* r : reviews) {
    const int len = static_cast<int>(r->tokens.size());
    if (r == attack) {
      d.attack_ids = r->tokens.ids();
    } else {
      d.ids.insert(d.ids.end(), r->tokens.begin(), r->tokens.end());
    }
    d.spans.emplace_back(offset, len);
    d.counterparts.push_back(r->counterpart);
    offset += len;
  }
  return d;
}

// Embeds `ids` followed by the attack tokens; the attack rows come from an
// input leaf when the caller wants their gradient.
Var embed_doc(Graph& g, ad::Parameter& table, const DocTokens& d, ad::Var* attack_leaf) {
  std::vector<Var> parts;
  if (!d.ids.empty()) parts.push_back(ad::lookup(g, table, d.ids));
  if (!d.attack_ids.empty()) {
    if (attack_leaf) {
      Matrix rows(static_cast<Eigen::Index>(d.attack_ids.size()), table.value.cols());
      for (std::size_t k = 0; k < d.attack_ids.size(); ++k)
        rows.row(static_cast<Eigen::Index>(k)) = table.value.row(d.attack_ids[k]);
      *attack_leaf = g.input(std::move(rows));
      parts.push_back(*attack_leaf);
    } else {
      parts.push_back(ad::lookup(g, table, d.attack_ids));
    }
  }
  return parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
}

HistoricalReview attack_review(const ItemQuery& item) {
  HistoricalReview a;
  a.counterpart = kAttackerId;
  if (item.attack) a.tokens = *item.attack;
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// DeepConnStyleModel

DeepConnStyleModel::DeepConnStyleModel(const RbrsHyper& hyper, std::size_t vocab_size) : RbrsModel(hyper) {
  Rng rng = make_rng(hyper.seed, "deepconn-init");
  const auto V = static_cast<Eigen::Index>(vocab_size);
  const Eigen::Index E = hyper.embed_dim, F = hyper.filters, W = hyper.window, L = hyper.latent_dim;
  embedding_ = &params_.add("embedding", nn::gaussian(rng, V, E, 0.1));
  embedding_->value.row(text::kPad).setZero();
  auto tower = [&](const std::string& name) {
    Tower t;
    t.conv_w = &params_.add(name + ".conv_w", nn::xavier(rng, W * E, F));
    t.conv_b = &params_.add(name + ".conv_b", Matrix::Zero(1, F));
    t.fc_w = &params_.add(name + ".fc_w", nn::xavier(rng, F, L));
    t.fc_b = &params_.add(name + ".fc_b", Matrix::Zero(1, L));
    return t;
  };
  user_tower_ = tower("user");
  item_tower_ = tower("item");
  fm_bias_ = &params_.add("fm.bias", Matrix::Zero(1, 1));
  fm_linear_ = &params_.add("fm.linear", nn::gaussian(rng, 2 * L, 1, 0.01));
  fm_factors_ = &params_.add("fm.factors", nn::gaussian(rng, 2 * L, hyper.fm_factors, 0.01));
}

Var DeepConnStyleModel::encode_doc(Graph& g, const Tower& tower, const std::vector<const HistoricalReview*>& reviews,
                                   const HistoricalReview* attack, ad::Var* attack_leaf) const {
  DocTokens d = collect(reviews, attack);
  const std::size_t total = d.ids.size() + d.attack_ids.size();
  if (total < static_cast<std::size_t>(hyper_.window)) d.ids.insert(d.ids.begin(), hyper_.window - total, text::kPad);
  Var x = embed_doc(g, *embedding_, d, attack_leaf);
  Var windows = ad::unfold_rows(x, hyper_.window);
  Var conv = ad::relu(ad::add_row(ad::matmul(windows, g.param(*tower.conv_w)), g.param(*tower.conv_b)));
  Var pooled = ad::max_rows(conv);
  return ad::tanh(ad::add_row(ad::matmul(pooled, g.param(*tower.fc_w)), g.param(*tower.fc_b)));
}

Var DeepConnStyleModel::encode_user(Graph& g, const UserQuery& user) const {
  return encode_doc(g, user_tower_,
                    visible_reviews(user.reviews, hyper_.max_reviews_per_user, user.exclude_review_id, nullptr),
                    nullptr, nullptr);
}

Var DeepConnStyleModel::encode_item(Graph& g, const ItemQuery& item, ad::Var* attack_leaf) const {
  const HistoricalReview attack = attack_review(item);
  return encode_doc(
      g, item_tower_,
      visible_reviews(item.reviews, hyper_.max_reviews_per_item, item.exclude_review_id, item.attack ? &attack : nullptr),
      &attack, attack_leaf);
}

Var DeepConnStyleModel::score(Graph& g, Var user_repr, Var item_repr, const UserQuery&, const ItemQuery&) const {
  const std::vector<Var> parts{user_repr, item_repr};
  Var z = ad::concat_cols(parts);
  Var v = g.param(*fm_factors_);
  Var linear = ad::matmul(z, g.param(*fm_linear_));
  Var zv = ad::matmul(z, v);
  Var pair = ad::sub(ad::sum(ad::square(zv)), ad::sum(ad::matmul(ad::square(z), ad::square(v))));
  return ad::add(ad::add(g.param(*fm_bias_), linear), ad::scale(pair, 0.5));
}

void DeepConnStyleModel::set_global_bias(double mean_rating) { fm_bias_->value(0, 0) = mean_rating; }

// ---------------------------------------------------------------------------
// AttentionIdModel

AttentionIdModel::AttentionIdModel(const RbrsHyper& hyper, std::size_t vocab_size, std::vector<std::string> user_ids,
                                   std::vector<std::string> item_ids)
    : RbrsModel(hyper), user_ids_(std::move(user_ids)), item_ids_(std::move(item_ids)) {
  for (std::size_t k = 0; k < user_ids_.size(); ++k) user_index_.emplace(user_ids_[k], static_cast<int>(k) + 1);
  for (std::size_t k = 0; k < item_ids_.size(); ++k) item_index_.emplace(item_ids_[k], static_cast<int>(k) + 1);
  Rng rng = make_rng(hyper.seed, "attention-id-init");
  const auto V = static_cast<Eigen::Index>(vocab_size);
  const Eigen::Index E = hyper.embed_dim, D = hyper.id_dim;
  const auto nu = static_cast<Eigen::Index>(user_ids_.size()) + 1;
  const auto ni = static_cast<Eigen::Index>(item_ids_.size()) + 1;
  embedding_ = &params_.add("embedding", nn::gaussian(rng, V, E, 0.1));
  embedding_->value.row(text::kPad).setZero();
  user_ids_table_ = &params_.add("user_ids", nn::gaussian(rng, nu, D, 0.1));
  item_ids_table_ = &params_.add("item_ids", nn::gaussian(rng, ni, D, 0.1));
  attacker_embedding_ = &params_.add("attacker_id", nn::gaussian(rng, 1, D, 0.1));
  attacker_embedding_->frozen = true;
  user_bias_ = &params_.add("user_bias", Matrix::Zero(nu, 1));
  item_bias_ = &params_.add("item_bias", Matrix::Zero(ni, 1));
  global_bias_ = &params_.add("global_bias", Matrix::Zero(1, 1));
  auto side = [&](const std::string& name) {
    Side s;
    s.review_w = &params_.add(name + ".review_w", nn::xavier(rng, E, D));
    s.review_b = &params_.add(name + ".review_b", Matrix::Zero(1, D));
    s.att_review = &params_.add(name + ".att_review", nn::xavier(rng, D, D));
    s.att_id = &params_.add(name + ".att_id", nn::xavier(rng, D, D));
    s.att_b = &params_.add(name + ".att_b", Matrix::Zero(1, D));
    s.att_v = &params_.add(name + ".att_v", nn::xavier(rng, D, 1));
    s.out_w = &params_.add(name + ".out_w", nn::xavier(rng, D, D));
    s.out_b = &params_.add(name + ".out_b", Matrix::Zero(1, D));
    return s;
  };
  user_side_ = side("user");
  item_side_ = side("item");
}

int AttentionIdModel::user_row(const std::string& user_id) const {
  auto it = user_index_.find(user_id);
  return it == user_index_.end() ? 0 : it->second;
}

int AttentionIdModel::item_row(const std::string& item_id) const {
  auto it = item_index_.find(item_id);
  return it == item_index_.end() ? 0 : it->second;
}

Var AttentionIdModel::counterpart_embedding(Graph& g, const std::string& id, bool is_user) const {
  if (id == kAttackerId) return g.param(*attacker_embedding_);
  const int row = is_user ? user_row(id) : item_row(id);
  return ad::lookup(g, is_user ? *user_ids_table_ : *item_ids_table_, std::span<const int>(&row, 1));
}

Var AttentionIdModel::pool(Graph& g, const Side& side, const std::vector<const HistoricalReview*>& reviews,
                           bool counterpart_is_user, const HistoricalReview* attack,
                           ad::Var* attack_leaf) const {
  const Eigen::Index D = hyper_.id_dim;
  if (reviews.empty()) return g.constant(Matrix::Zero(1, D));
  const DocTokens d = collect(reviews, attack);
  Var x = embed_doc(g, *embedding_, d, attack_leaf);
  // Averaging matrix: one row per review over that review's token rows.
  const auto R = static_cast<Eigen::Index>(d.spans.size());
  Matrix avg = Matrix::Zero(R, x.rows());
  for (Eigen::Index r = 0; r < R; ++r) {
    const auto [start, len] = d.spans[static_cast<std::size_t>(r)];
    for (int k = 0; k < len; ++k) avg(r, start + k) = 1.0 / len;
  }
  Var means = ad::matmul(g.constant(std::move(avg)), x);
  Var h = ad::tanh(ad::add_row(ad::matmul(means, g.param(*side.review_w)), g.param(*side.review_b)));
  std::vector<Var> ids;
  ids.reserve(d.counterparts.size());
  for (const auto& c : d.counterparts) ids.push_back(counterpart_embedding(g, c, counterpart_is_user));
  Var id_rows = ad::concat_rows(ids);
  Var hidden = ad::relu(ad::add_row(
      ad::add(ad::matmul(h, g.param(*side.att_review)), ad::matmul(id_rows, g.param(*side.att_id))),
      g.param(*side.att_b)));
  Var logits = ad::transpose(ad::matmul(hidden, g.param(*side.att_v)));  // 1 x R
  Var weights = ad::softmax_rows(logits);
  Var pooled = ad::matmul(weights, h);
  return ad::tanh(ad::add_row(ad::matmul(pooled, g.param(*side.out_w)), g.param(*side.out_b)));
}

Var AttentionIdModel::encode_user(Graph& g, const UserQuery& user) const {
  const auto reviews = visible_reviews(user.reviews, hyper_.max_reviews_per_user, user.exclude_review_id, nullptr);
  Var pooled = pool(g, user_side_, reviews, false, nullptr, nullptr);
  const int row = user_row(user.user_id);
  return ad::add(pooled, ad::lookup(g, *user_ids_table_, std::span<const int>(&row, 1)));
}

Var AttentionIdModel::encode_item(Graph& g, const ItemQuery& item, ad::Var* attack_leaf) const {
  const HistoricalReview attack = attack_review(item);
  const auto reviews = visible_reviews(item.reviews, hyper_.max_reviews_per_item, item.exclude_review_id,
                                       item.attack ? &attack : nullptr);
  Var pooled = pool(g, item_side_, reviews, true, &attack, attack_leaf);
  const int row = item_row(item.item_id);
  return ad::add(pooled, ad::lookup(g, *item_ids_table_, std::span<const int>(&row, 1)));
}

Var AttentionIdModel::score(Graph& g, Var user_repr, Var item_repr, const UserQuery& user,
                            const ItemQuery& item) const {
  const int u = user_row(user.user_id);
  const int i = item_row(item.item_id);
  Var dot = ad::sum(ad::mul(user_repr, item_repr));
  Var bu = ad::lookup(g, *user_bias_, std::span<const int>(&u, 1));
  Var bi = ad::lookup(g, *item_bias_, std::span<const int>(&i, 1));
  return ad::add(ad::add(ad::add(dot, bu), bi), g.param(*global_bias_));
}

void AttentionIdModel::set_global_bias(double mean_rating) { global_bias_->value(0, 0) = mean_rating; }

nlohmann::json AttentionIdModel::extra_state() const { return {{"user_ids", user_ids_}, {"item_ids", item_ids_}}; }

// ---------------------------------------------------------------------------
// BagOfWordsModel

namespace {
RbrsHyper bow_hyper(Eigen::Index embed_dim) {
  RbrsHyper h;
  h.kind = "bow";
  h.embed_dim = static_cast<int>(embed_dim);
  h.max_reviews_per_user = std::numeric_limits<std::size_t>::max();
  h.max_reviews_per_item = std::numeric_limits<std::size_t>::max();
  return h;
}
}  // namespace

BagOfWordsModel::BagOfWordsModel(Matrix embeddings, Matrix direction, double bias)
    : RbrsModel(bow_hyper(embeddings.cols())) {
  if (direction.rows() != embeddings.cols() || direction.cols() != 1)
    throw std::invalid_argument("direction must be a column with one entry per embedding dimension");
  embedding_ = &params_.add("embedding", std::move(embeddings));
  direction_ = &params_.add("direction", std::move(direction));
  bias_ = &params_.add("bias", Matrix::Constant(1, 1, bias));
}

double BagOfWordsModel::token_weight(int token) const {
  return embedding_->value.row(token).dot(direction_->value.col(0));
}

Var BagOfWordsModel::encode_user(Graph& g, const UserQuery&) const { return g.constant(Matrix::Zero(1, 1)); }

Var BagOfWordsModel::encode_item(Graph& g, const ItemQuery& item, ad::Var* attack_leaf) const {
  const HistoricalReview attack = attack_review(item);
  const auto reviews = visible_reviews(item.reviews, hyper_.max_reviews_per_item, item.exclude_review_id,
                                       item.attack ? &attack : nullptr);
  const DocTokens d = collect(reviews, &attack);
  if (d.ids.empty() && d.attack_ids.empty()) return g.constant(Matrix::Zero(1, 1));
  Var x = embed_doc(g, *embedding_, d, attack_leaf);
  return ad::matmul(ad::sum_rows(x), g.param(*direction_));
}

Var BagOfWordsModel::score(Graph& g, Var user_repr, Var item_repr, const UserQuery&, const ItemQuery&) const {
  return ad::add(ad::add(g.param(*bias_), item_repr), user_repr);
}

void BagOfWordsModel::set_global_bias(double mean_rating) { bias_->value(0, 0) = mean_rating; }

}  // namespace revshill::rbrs
