#pragma once

// Review-based recommenders and the black-box view an attacker gets of them.
//
// A recommender predicts R_ui from the review histories S_u and S_i (and,
// for ID-aware models, the user/item identities). Injecting an attack review
// appends it to S_i; the prediction shift is the difference it causes.

#include "revshill/autodiff.hpp"
#include "revshill/corpus.hpp"
#include "revshill/textproc.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace revshill::rbrs {

using text::TokenSequence;

// Author id attached to injected reviews.
inline const std::string kAttackerId = "__attacker__";

struct HistoricalReview {
  std::string review_id;
  // The other party: the author for item-side lists, the reviewed item for user-side lists.
  std::string counterpart;
  TokenSequence tokens;
};
using ReviewList = std::vector<HistoricalReview>;

// The review store a recommender serves from, ordered oldest first.
class ReviewHistory {
 public:
  static ReviewHistory from_corpus(const corpus::Corpus& corpus, std::span<const std::size_t> review_indices);

  const ReviewList& user_reviews(const std::string& user_id) const;
  const ReviewList& item_reviews(const std::string& item_id) const;
  // Adds a document-only review to S_i (adversarial augmentation).
  void append_item_review(const std::string& item_id, HistoricalReview review);

 private:
  std::unordered_map<std::string, ReviewList> by_user_;
  std::unordered_map<std::string, ReviewList> by_item_;
};

struct UserQuery {
  std::string user_id;
  const ReviewList* reviews = nullptr;
  std::string exclude_review_id;  // the training target, kept out of its own history
};

struct ItemQuery {
  std::string item_id;
  const ReviewList* reviews = nullptr;
  std::string exclude_review_id;
  const TokenSequence* attack = nullptr;  // appended to S_i when non-empty
};

// Reviews a tower sees: the newest `cap`, oldest evicted first. A non-empty
// attack review is always retained and placed last; an empty one is ignored.
std::vector<const HistoricalReview*> visible_reviews(const ReviewList* reviews, std::size_t cap,
                                                     const std::string& exclude_review_id,
                                                     const HistoricalReview* attack);

struct RbrsHyper {
  std::string kind = "deepconn";  // deepconn | attention_id | bow
  int embed_dim = 64;
  int filters = 50;
  int window = 3;
  int latent_dim = 32;
  int fm_factors = 8;
  int id_dim = 32;
  std::size_t max_reviews_per_user = 10;
  std::size_t max_reviews_per_item = 10;
  double lr = 2e-3;
  int epochs = 10;
  int batch_size = 16;
  int patience = 3;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static RbrsHyper from_json(const nlohmann::json& j);
};

struct TrainingHistory {
  std::vector<double> train_mse;
  std::vector<double> val_mse;
  int best_epoch = -1;
  double best_val_mse = 0.0;

  nlohmann::json to_json() const;
};

class RbrsModel {
 public:
  virtual ~RbrsModel() = default;

  virtual std::string kind() const = 0;
  virtual bool uses_user_id() const = 0;
  virtual bool uses_item_id() const = 0;
  virtual const ad::Matrix& word_embeddings() const = 0;

  // Raw (unclipped) ratings of several users against one item document.
  std::vector<double> predict_users(std::span<const UserQuery> users, const ItemQuery& item) const;
  double predict(const UserQuery& user, const ItemQuery& item, bool clip = false) const;

  // d mean_u R_ui / d e_t for each token t of item.attack (white-box access).
  ad::Matrix attack_embedding_gradient(std::span<const UserQuery> users, const ItemQuery& item) const;

  ad::Var predict_graph(ad::Graph& g, const UserQuery& user, const ItemQuery& item) const;

  virtual ad::Var encode_user(ad::Graph& g, const UserQuery& user) const = 0;
  // When `attack_leaf` is non-null and the attack is visible, the attack's
  // word embeddings enter the graph as an input leaf stored there.
  virtual ad::Var encode_item(ad::Graph& g, const ItemQuery& item, ad::Var* attack_leaf) const = 0;
  virtual ad::Var score(ad::Graph& g, ad::Var user_repr, ad::Var item_repr, const UserQuery& user,
                        const ItemQuery& item) const = 0;
  // Called once before training with the mean training rating.
  virtual void set_global_bias(double mean_rating) = 0;

  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }
  const RbrsHyper& hyper() const { return hyper_; }
  virtual nlohmann::json extra_state() const { return nlohmann::json::object(); }

  // Memoises user representations inside predict_users. Only valid while the
  // parameters stay fixed; train_rbrs switches it off.
  void set_serving_cache(bool on) const;

 protected:
  explicit RbrsModel(RbrsHyper hyper) : hyper_(std::move(hyper)) {}

  RbrsHyper hyper_;
  ad::ParameterStore params_;

 private:
  mutable bool serving_cache_ = false;
  mutable std::unordered_map<std::string, ad::Matrix> user_cache_;
};

// DeepCoNN-style: one text-CNN tower over the concatenated user reviews, one
// over the concatenated item reviews, factorisation-machine head. Ignores ids.
class DeepConnStyleModel final : public RbrsModel {
 public:
  DeepConnStyleModel(const RbrsHyper& hyper, std::size_t vocab_size);

  std::string kind() const override { return "deepconn"; }
  bool uses_user_id() const override { return false; }
  bool uses_item_id() const override { return false; }
  const ad::Matrix& word_embeddings() const override { return embedding_->value; }

  ad::Var encode_user(ad::Graph& g, const UserQuery& user) const override;
  ad::Var encode_item(ad::Graph& g, const ItemQuery& item, ad::Var* attack_leaf) const override;
  ad::Var score(ad::Graph& g, ad::Var user_repr, ad::Var item_repr, const UserQuery& user,
                const ItemQuery& item) const override;
  void set_global_bias(double mean_rating) override;

 private:
  struct Tower {
    ad::Parameter* conv_w;
    ad::Parameter* conv_b;
    ad::Parameter* fc_w;
    ad::Parameter* fc_b;
  };
  ad::Var encode_doc(ad::Graph& g, const Tower& tower, const std::vector<const HistoricalReview*>& reviews,
                     const HistoricalReview* attack, ad::Var* attack_leaf) const;

  ad::Parameter* embedding_;
  Tower user_tower_;
  Tower item_tower_;
  ad::Parameter* fm_bias_;
  ad::Parameter* fm_linear_;
  ad::Parameter* fm_factors_;
};

// Review-level attention pooling combined with user/item ID embeddings. The
// author of each item review contributes its ID embedding to the attention;
// an injected review's author gets a fixed randomly initialised embedding.
class AttentionIdModel final : public RbrsModel {
 public:
  AttentionIdModel(const RbrsHyper& hyper, std::size_t vocab_size, std::vector<std::string> user_ids,
                   std::vector<std::string> item_ids);

  std::string kind() const override { return "attention_id"; }
  bool uses_user_id() const override { return true; }
  bool uses_item_id() const override { return true; }
  const ad::Matrix& word_embeddings() const override { return embedding_->value; }

  ad::Var encode_user(ad::Graph& g, const UserQuery& user) const override;
  ad::Var encode_item(ad::Graph& g, const ItemQuery& item, ad::Var* attack_leaf) const override;
  ad::Var score(ad::Graph& g, ad::Var user_repr, ad::Var item_repr, const UserQuery& user,
                const ItemQuery& item) const override;
  void set_global_bias(double mean_rating) override;
  nlohmann::json extra_state() const override;

  // Row 0 of each id table is the reserved cold-start embedding.
  int user_row(const std::string& user_id) const;
  int item_row(const std::string& item_id) const;

 private:
  struct Side {
    ad::Parameter* review_w;
    ad::Parameter* review_b;
    ad::Parameter* att_review;
    ad::Parameter* att_id;
    ad::Parameter* att_b;
    ad::Parameter* att_v;
    ad::Parameter* out_w;
    ad::Parameter* out_b;
  };
  ad::Var pool(ad::Graph& g, const Side& side, const std::vector<const HistoricalReview*>& reviews,
               bool counterpart_is_user, const HistoricalReview* attack, ad::Var* attack_leaf) const;
  ad::Var counterpart_embedding(ad::Graph& g, const std::string& id, bool is_user) const;

  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, int> user_index_;
  std::unordered_map<std::string, int> item_index_;
  ad::Parameter* embedding_;
  ad::Parameter* user_ids_table_;
  ad::Parameter* item_ids_table_;
  ad::Parameter* attacker_embedding_;
  ad::Parameter* user_bias_;
  ad::Parameter* item_bias_;
  ad::Parameter* global_bias_;
  Side user_side_;
  Side item_side_;
};

// Linear bag-of-words surrogate: R_ui = bias + sum over item-document tokens
// of <e_t, direction>. Adding a review shifts every user's rating by the
// summed weights of its tokens, which gives closed-form oracles for attacks.
class BagOfWordsModel final : public RbrsModel {
 public:
  BagOfWordsModel(ad::Matrix embeddings, ad::Matrix direction, double bias);

  std::string kind() const override { return "bow"; }
  bool uses_user_id() const override { return false; }
  bool uses_item_id() const override { return false; }
  const ad::Matrix& word_embeddings() const override { return embedding_->value; }

  ad::Var encode_user(ad::Graph& g, const UserQuery& user) const override;
  ad::Var encode_item(ad::Graph& g, const ItemQuery& item, ad::Var* attack_leaf) const override;
  ad::Var score(ad::Graph& g, ad::Var user_repr, ad::Var item_repr, const UserQuery& user,
                const ItemQuery& item) const override;
  void set_global_bias(double mean_rating) override;

  double token_weight(int token) const;

 private:
  ad::Parameter* embedding_;
  ad::Parameter* direction_;
  ad::Parameter* bias_;
};

std::unique_ptr<RbrsModel> make_rbrs(const RbrsHyper& hyper, std::size_t vocab_size, const corpus::Corpus& corpus,
                                     std::span<const std::size_t> train_reviews);

// Minimises squared error on the training reviews; restores the parameters
// of the epoch with the best validation MSE. Throws DivergenceError when
// validation MSE rises for `patience` consecutive epochs or turns non-finite.
TrainingHistory train_rbrs(RbrsModel& model, const corpus::Corpus& corpus, const corpus::Split& split,
                           const ReviewHistory& history);

// Mean squared error over the given reviews, predictions clipped to [1,5].
double rating_mse(const RbrsModel& model, const corpus::Corpus& corpus, std::span<const std::size_t> reviews,
                  const ReviewHistory& history);

void save_rbrs(const RbrsModel& model, const std::string& stem, const std::string& vocab_hash,
               const TrainingHistory& history);
std::unique_ptr<RbrsModel> load_rbrs(const std::string& stem, const text::Vocabulary& vocab);

inline double clip_rating(double r) { return r < 1.0 ? 1.0 : (r > 5.0 ? 5.0 : r); }

struct ShiftSample {
  std::string user_id;
  double base = 0.0;
  double attacked = 0.0;
};

// The attacker's only view of a recommender: predictions, never parameters.
class BlackBoxRecommender {
 public:
  explicit BlackBoxRecommender(std::shared_ptr<const RbrsModel> model) : model_(std::move(model)) {}
  BlackBoxRecommender(const BlackBoxRecommender&) = delete;
  BlackBoxRecommender& operator=(const BlackBoxRecommender&) = delete;

  double predict(const std::string& user_id, const std::string& item_id, const ReviewList& user_reviews,
                 const ReviewList& item_reviews, bool clip = false) const;
  double predict_with_attack(const std::string& user_id, const std::string& item_id, const ReviewList& user_reviews,
                             const ReviewList& item_reviews, const TokenSequence& attack, bool clip = false) const;
  // Ratings before and after injecting `attack` for each user; counts two
  // predictions per user.
  std::vector<ShiftSample> prediction_shifts(std::span<const UserQuery> users, const std::string& item_id,
                                             const ReviewList& item_reviews, const TokenSequence& attack) const;

  std::uint64_t prediction_count() const { return count_.load(); }

 private:
  std::shared_ptr<const RbrsModel> model_;
  mutable std::atomic<std::uint64_t> count_{0};
};

std::unique_ptr<BlackBoxRecommender> black_box(std::shared_ptr<const RbrsModel> model);

}  // namespace revshill::rbrs
