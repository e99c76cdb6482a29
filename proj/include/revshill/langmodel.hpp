#pragma once

// Autoregressive language model used only to score fluency.

#include "revshill/autodiff.hpp"
#include "revshill/corpus.hpp"
#include "revshill/nn.hpp"
#include "revshill/textproc.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <vector>

namespace revshill::lm {

using text::TokenSequence;

// Anything that assigns next-token distributions to a review. Row t of the
// result is log p(. | BOS, s_0..s_{t-1}); there are len+1 rows, the last
// one predicting EOS.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual ad::Matrix log_distributions(const TokenSequence& seq) const = 0;

  // log p of each content token followed by EOS.
  std::vector<double> step_log_probs(const TokenSequence& seq) const;
};

// Every token equally likely.
class UniformScorer final : public TokenScorer {
 public:
  explicit UniformScorer(std::size_t vocab_size) : vocab_size_(vocab_size) {}
  std::size_t vocab_size() const override { return vocab_size_; }
  ad::Matrix log_distributions(const TokenSequence& seq) const override;

 private:
  std::size_t vocab_size_;
};

struct LmHyper {
  int dim = 48;
  int heads = 2;
  int layers = 2;
  int ff_dim = 96;
  double lr = 3e-3;
  int epochs = 6;
  int batch_size = 16;
  int patience = 2;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static LmHyper from_json(const nlohmann::json& j);
};

class AutoregressiveLm final : public TokenScorer {
 public:
  AutoregressiveLm(const LmHyper& hyper, std::size_t vocab_size);

  std::size_t vocab_size() const override { return vocab_size_; }
  ad::Matrix log_distributions(const TokenSequence& seq) const override;

  // Summed negative log-likelihood of content tokens plus EOS.
  ad::Var nll(ad::Graph& g, const TokenSequence& seq) const;

  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }
  const LmHyper& hyper() const { return hyper_; }

 private:
  ad::Var logits(ad::Graph& g, const TokenSequence& seq) const;

  LmHyper hyper_;
  std::size_t vocab_size_;
  ad::ParameterStore params_;
  ad::Parameter* embedding_;
  ad::Parameter* positions_;
  std::vector<nn::TransformerLayer> layers_;
  nn::LayerNorm final_norm_;
  nn::Linear head_;
};

struct LmHistory {
  std::vector<double> train_nll;  // per token
  std::vector<double> val_nll;
  int best_epoch = -1;
  double best_val_nll = 0.0;

  nlohmann::json to_json() const;
};

// Mean per-token loss over a batch (what the trainer minimises).
ad::Var lm_batch_loss(ad::Graph& g, const AutoregressiveLm& lm, std::span<const TokenSequence> batch);

LmHistory train_lm(AutoregressiveLm& lm, const corpus::Corpus& corpus, const corpus::Split& split);

// exp(mean negative log-likelihood); rejects empty and over-long sequences.
double perplexity(const TokenScorer& lm, const TokenSequence& seq);
double inverse_perplexity(const TokenScorer& lm, const TokenSequence& seq);

void save_lm(const AutoregressiveLm& lm, const std::string& stem, const std::string& vocab_hash,
             const LmHistory& history);
std::unique_ptr<AutoregressiveLm> load_lm(const std::string& stem, const text::Vocabulary& vocab);

}  // namespace revshill::lm
