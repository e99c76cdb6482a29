#pragma once

// Attention-based aspect extraction: K latent aspects learned without labels,
// an aspect distribution per review, representative words per aspect and the
// L1 aspect loss between two distributions.

#include "revshill/autodiff.hpp"
#include "revshill/corpus.hpp"
#include "revshill/textproc.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <span>
#include <vector>

namespace revshill::abae {

using text::TokenSequence;

// A point of the K-simplex.
class AspectDistribution {
 public:
  explicit AspectDistribution(std::vector<double> weights);

  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t k) const { return weights_[k]; }
  std::size_t argmax() const;

 private:
  std::vector<double> weights_;
};

struct AbaeHyper {
  int aspects = 15;
  int negatives = 20;
  double ortho_weight = 1.0;
  int embed_dim = 32;
  int window = 5;
  double lr = 5e-3;
  int epochs = 6;
  int batch_size = 32;
  int patience = 2;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static AbaeHyper from_json(const nlohmann::json& j);
};

// Word vectors from positive PMI co-occurrence counts factorised by a
// randomized SVD; rows normalised, special tokens zero.
ad::Matrix ppmi_svd_embeddings(std::span<const TokenSequence> sentences, std::size_t vocab_size, int dim, int window,
                               std::uint64_t seed);

class AspectModel {
 public:
  AspectModel(const AbaeHyper& hyper, ad::Matrix word_embeddings);

  int aspects() const { return hyper_.aspects; }
  const AbaeHyper& hyper() const { return hyper_; }
  const ad::Matrix& word_embeddings() const { return embeddings_->value; }
  const ad::Matrix& aspect_matrix() const { return aspects_->value; }

  // z_s: attention-weighted sentence embedding of the rows of `words`.
  ad::Var sentence_embedding(ad::Graph& g, ad::Var words) const;
  // p_t = softmax(W z + b).
  ad::Var aspect_weights(ad::Graph& g, ad::Var sentence) const;
  // r_s = T^T p_t.
  ad::Var reconstruct(ad::Graph& g, ad::Var weights) const;

  // Distribution from a matrix of (possibly expected) word embeddings; the
  // generator back-propagates through this.
  ad::Var distribution_graph(ad::Graph& g, ad::Var words) const;

  AspectDistribution distribution(const TokenSequence& review) const;

  // Hinge reconstruction loss plus orthogonality penalty for one sentence.
  ad::Var sample_loss(ad::Graph& g, const TokenSequence& sentence, std::span<const TokenSequence> negatives) const;
  ad::Var orthogonality_penalty(ad::Graph& g) const;
  double orthogonality() const;

  // Content words with the highest cosine similarity to aspect k, descending.
  std::vector<int> top_words(int aspect, std::size_t n) const;
  // Union of the top-n words of every aspect.
  std::unordered_set<int> aspect_word_set(std::size_t n) const;

  // Keeps every row of T at unit norm.
  void normalize_aspects();

  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }

 private:
  std::vector<int> content_ids(const TokenSequence& seq) const;

  AbaeHyper hyper_;
  ad::ParameterStore params_;
  ad::Parameter* embeddings_;
  ad::Parameter* attention_;
  ad::Parameter* weights_w_;
  ad::Parameter* weights_b_;
  ad::Parameter* aspects_;
};

// sum_i max(0, 1 - r.z + r.n_i) with r, z, n_i l2-normalised.
ad::Var max_margin_loss(ad::Var reconstruction, ad::Var sentence, ad::Var negatives);

struct AbaeHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  double initial_orthogonality = 0.0;
  double final_orthogonality = 0.0;
  int best_epoch = -1;

  nlohmann::json to_json() const;
};

// Builds embeddings, initialises T by k-means over them and trains.
std::unique_ptr<AspectModel> train_abae(const corpus::Corpus& corpus, const corpus::Split& split, std::size_t vocab_size,
                                        const AbaeHyper& hyper, AbaeHistory* history = nullptr);

// phi of the item review with the highest ROUGE-1 F1 against `generated`;
// ties go to the lowest index.
AspectDistribution select_target_distribution(const AspectModel& model, const TokenSequence& generated,
                                              std::span<const TokenSequence> item_reviews);
std::size_t select_target_index(const TokenSequence& generated, std::span<const TokenSequence> item_reviews);

double aspect_loss(const AspectDistribution& target, const AspectDistribution& generated);

nlohmann::json export_aspect_words(const AspectModel& model, const text::Vocabulary& vocab, std::size_t n);

void save_abae(const AspectModel& model, const std::string& stem, const std::string& vocab_hash,
               const AbaeHistory& history);
std::unique_ptr<AspectModel> load_abae(const std::string& stem, const text::Vocabulary& vocab);

}  // namespace revshill::abae
