#pragma once

// The attack review generator: a small transformer encoder-decoder reading an
// item's historical reviews and writing one new review.

#include "revshill/autodiff.hpp"
#include "revshill/corpus.hpp"
#include "revshill/nn.hpp"
#include "revshill/textproc.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <span>
#include <vector>

namespace revshill::arg {

using text::TokenSequence;

struct GeneratorHyper {
  int dim = 48;
  int heads = 2;
  int encoder_layers = 1;
  int decoder_layers = 2;
  int ff_dim = 96;
  std::size_t max_context_reviews = 8;
  std::size_t context_budget = 512;
  std::size_t max_decode_length = text::kMaxSequenceLength;
  double lr = 3e-3;
  int epochs = 6;
  int batch_size = 8;
  int patience = 2;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static GeneratorHyper from_json(const nlohmann::json& j);
};

enum class DecodeMode { kSampled, kGreedy };

struct DecodeResult {
  TokenSequence tokens;                 // without EOS
  std::vector<double> step_log_probs;   // one per token
  bool stopped = false;                 // EOS was emitted
  double stop_log_prob = 0.0;           // log p(EOS) at the final step when stopped
  DecodeMode mode = DecodeMode::kSampled;

  // Log-likelihood of the whole action trace, stop decision included.
  double total_log_prob() const;
};

// Concatenates up to `max_reviews` reviews (already most-recent first),
// separated by EOS and truncated to `budget` tokens.
TokenSequence build_context(std::span<const TokenSequence> reviews, std::size_t max_reviews, std::size_t budget);

class GeneratorModel {
 public:
  GeneratorModel(const GeneratorHyper& hyper, std::size_t vocab_size);

  const GeneratorHyper& hyper() const { return hyper_; }
  std::size_t vocab_size() const { return vocab_size_; }

  ad::Var encode(ad::Graph& g, const TokenSequence& context) const;
  // Log-probabilities (rows = len(prefix)+1) of the next token after BOS +
  // prefix, at the given temperature. PAD and BOS are never produced.
  ad::Var decoder_log_probs(ad::Graph& g, ad::Var memory, const TokenSequence& prefix,
                            double temperature = 1.0) const;

  // Summed log-probability of `target` followed by EOS.
  ad::Var sequence_log_prob(ad::Graph& g, ad::Var memory, const TokenSequence& target, bool with_eos = true,
                            double temperature = 1.0) const;
  // Teacher-forced negative log-likelihood of `target` + EOS.
  ad::Var teacher_forced_nll(ad::Graph& g, const TokenSequence& context, const TokenSequence& target) const;

  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }

 private:
  GeneratorHyper hyper_;
  std::size_t vocab_size_;
  ad::ParameterStore params_;
  ad::Parameter* embedding_;
  ad::Parameter* enc_positions_;
  ad::Parameter* dec_positions_;
  std::vector<nn::TransformerLayer> encoder_;
  std::vector<nn::TransformerLayer> decoder_;
  nn::LayerNorm enc_norm_;
  nn::LayerNorm dec_norm_;
  nn::Linear head_;
  ad::Matrix output_mask_;
};

// Multinomial sampling per step. A temperature <= 0 is the greedy limit.
DecodeResult sample_decode(const GeneratorModel& gen, const TokenSequence& context, double temperature,
                           std::uint64_t seed);
DecodeResult greedy_decode(const GeneratorModel& gen, const TokenSequence& context);

struct GenExample {
  TokenSequence context;
  TokenSequence target;
};

// Leave-one-out examples: every review of an item predicted from the others
// (most recent first). Reviews are taken from `corpus` token lists.
std::vector<GenExample> make_gen_examples(const corpus::Corpus& corpus, std::span<const corpus::LooExample> loo,
                                          const GeneratorHyper& hyper);

struct PretrainHistory {
  std::vector<double> train_nll;  // per token
  std::vector<double> val_nll;
  int best_epoch = -1;
  double best_val_nll = 0.0;

  nlohmann::json to_json() const;
};

double mean_token_nll(const GeneratorModel& gen, std::span<const GenExample> examples);

PretrainHistory pretrain_loo(GeneratorModel& gen, std::span<const GenExample> train, std::span<const GenExample> val);

void save_generator(const GeneratorModel& gen, const std::string& stem, const std::string& vocab_hash,
                    const nlohmann::json& history, const nlohmann::json& extra = nlohmann::json::object());
std::unique_ptr<GeneratorModel> load_generator(const std::string& stem, const text::Vocabulary& vocab);

}  // namespace revshill::arg
