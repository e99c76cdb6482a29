#include "revshill/generator.hpp"

#include "revshill/checkpoint.hpp"
#include "revshill/errors.hpp"
#include "revshill/optim.hpp"
#include "revshill/random.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>

namespace revshill::arg {

using ad::Graph;
using ad::Matrix;
using ad::Var;

double DecodeResult::total_log_prob() const {
  double total = std::accumulate(step_log_probs.begin(), step_log_probs.end(), 0.0);
  if (stopped) total += stop_log_prob;
  return total;
}

nlohmann::json GeneratorHyper::to_json() const {
  return {{"dim", dim},
          {"heads", heads},
          {"encoder_layers", encoder_layers},
          {"decoder_layers", decoder_layers},
          {"ff_dim", ff_dim},
          {"max_context_reviews", max_context_reviews},
          {"context_budget", context_budget},
          {"max_decode_length", max_decode_length},
          {"lr", lr},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"patience", patience},
          {"seed", seed}};
}

GeneratorHyper GeneratorHyper::from_json(const nlohmann::json& j) {
  GeneratorHyper h;
  h.dim = j.value("dim", h.dim);
  h.heads = j.value("heads", h.heads);
  h.encoder_layers = j.value("encoder_layers", h.encoder_layers);
  h.decoder_layers = j.value("decoder_layers", h.decoder_layers);
  h.ff_dim = j.value("ff_dim", h.ff_dim);
  h.max_context_reviews = j.value("max_context_reviews", h.max_context_reviews);
  h.context_budget = j.value("context_budget", h.context_budget);
  h.max_decode_length = j.value("max_decode_length", h.max_decode_length);
  h.lr = j.value("lr", h.lr);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.patience = j.value("patience", h.patience);
  h.seed = j.value("seed", h.seed);
  return h;
}

nlohmann::json PretrainHistory::to_json() const {
  return {{"train_nll", train_nll}, {"val_nll", val_nll}, {"best_epoch", best_epoch}, {"best_val_nll", best_val_nll}};
}

TokenSequence build_context(std::span<const TokenSequence> reviews, std::size_t max_reviews, std::size_t budget) {
  std::vector<int> ids;
  std::size_t used = 0;
  for (const auto& r : reviews) {
    if (used == max_reviews) break;
    if (r.empty()) continue;
    if (!ids.empty()) ids.push_back(text::kEos);
    ids.insert(ids.end(), r.begin(), r.end());
    ++used;
  }
  if (ids.size() > budget) ids.resize(budget);
  return TokenSequence(std::move(ids));
}

GeneratorModel::GeneratorModel(const GeneratorHyper& hyper, std::size_t vocab_size)
    : hyper_(hyper), vocab_size_(vocab_size) {
  if (hyper.dim % hyper.heads != 0) throw ConfigError("arg.dim must be divisible by arg.heads");
  if (hyper.max_decode_length > text::kMaxSequenceLength) throw ConfigError("arg.max_decode_length exceeds 128");
  Rng rng = make_rng(hyper.seed, "generator-init");
  const auto V = static_cast<Eigen::Index>(vocab_size);
  embedding_ = &params_.add("embedding", nn::gaussian(rng, V, hyper.dim, 0.1));
  enc_positions_ =
      &params_.add("enc_positions", nn::gaussian(rng, static_cast<Eigen::Index>(hyper.context_budget), hyper.dim, 0.02));
  dec_positions_ = &params_.add("dec_positions", nn::gaussian(rng, text::kMaxSequenceLength + 1, hyper.dim, 0.02));
  for (int l = 0; l < hyper.encoder_layers; ++l)
    encoder_.push_back(
        nn::TransformerLayer::create(params_, "enc" + std::to_string(l), hyper.dim, hyper.ff_dim, hyper.heads, false, rng));
  for (int l = 0; l < hyper.decoder_layers; ++l)
    decoder_.push_back(
        nn::TransformerLayer::create(params_, "dec" + std::to_string(l), hyper.dim, hyper.ff_dim, hyper.heads, true, rng));
  enc_norm_ = nn::LayerNorm::create(params_, "enc_norm", hyper.dim);
  dec_norm_ = nn::LayerNorm::create(params_, "dec_norm", hyper.dim);
  head_ = nn::Linear::create(params_, "head", hyper.dim, V, rng);
  output_mask_ = Matrix::Zero(1, V);
  output_mask_(0, text::kPad) = -1e9;
  output_mask_(0, text::kBos) = -1e9;
}

Var GeneratorModel::encode(Graph& g, const TokenSequence& context) const {
  if (context.empty()) throw std::invalid_argument("generator context is empty");
  if (context.size() > hyper_.context_budget) throw std::invalid_argument("generator context exceeds its budget");
  std::vector<int> pos(context.size());
  std::iota(pos.begin(), pos.end(), 0);
  Var x = ad::add(ad::lookup(g, *embedding_, context.ids()), ad::lookup(g, *enc_positions_, pos));
  for (const auto& layer : encoder_) x = layer(g, x, nullptr, nullptr);
  return enc_norm_(g, x);
}

Var GeneratorModel::decoder_log_probs(Graph& g, Var memory, const TokenSequence& prefix, double temperature) const {
  if (prefix.size() > text::kMaxSequenceLength) throw std::invalid_argument("decoder prefix longer than 128 tokens");
  std::vector<int> inputs{text::kBos};
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  std::vector<int> pos(inputs.size());
  std::iota(pos.begin(), pos.end(), 0);
  Var x = ad::add(ad::lookup(g, *embedding_, inputs), ad::lookup(g, *dec_positions_, pos));
  const Matrix mask = ad::causal_mask(static_cast<Eigen::Index>(inputs.size()));
  for (const auto& layer : decoder_) x = layer(g, x, &mask, &memory);
  Var logits = head_(g, dec_norm_(g, x));
  if (temperature != 1.0) logits = ad::scale(logits, 1.0 / temperature);
  return ad::log_softmax_rows(ad::add_row(logits, g.constant(output_mask_)));
}

Var GeneratorModel::sequence_log_prob(Graph& g, Var memory, const TokenSequence& target, bool with_eos,
                                      double temperature) const {
  std::vector<int> idx(target.begin(), target.end());
  if (with_eos) idx.push_back(text::kEos);
  if (idx.empty()) return g.constant(Matrix::Zero(1, 1));
  Var lp = decoder_log_probs(g, memory, target, temperature);
  if (!with_eos) lp = ad::slice_rows(lp, 0, static_cast<Eigen::Index>(target.size()));
  return ad::sum(ad::pick(lp, idx));
}

Var GeneratorModel::teacher_forced_nll(Graph& g, const TokenSequence& context, const TokenSequence& target) const {
  return ad::scale(sequence_log_prob(g, encode(g, context), target), -1.0);
}

namespace {

DecodeResult decode(const GeneratorModel& gen, const TokenSequence& context, double temperature, Rng* rng) {
  const bool greedy = temperature <= 0.0 || rng == nullptr;
  const double t = greedy ? 1.0 : temperature;
  Graph enc(false);
  const Matrix memory = gen.encode(enc, context).value();
  DecodeResult out;
  out.mode = greedy ? DecodeMode::kGreedy : DecodeMode::kSampled;
  while (out.tokens.size() < gen.hyper().max_decode_length) {
    Graph g(false);
    const Matrix lp = gen.decoder_log_probs(g, g.constant_ref(memory), out.tokens, t).value();
    const Eigen::RowVectorXd row = lp.row(lp.rows() - 1);
    Eigen::Index choice = 0;
    if (greedy) {
      row.maxCoeff(&choice);
    } else {
      const double u = uniform01(*rng);
      double acc = 0.0;
      choice = row.size() - 1;
      for (Eigen::Index v = 0; v < row.size(); ++v) {
        acc += std::exp(row(v));
        if (u < acc) {
          choice = v;
          break;
        }
      }
      // Rounding can leave the tail of the CDF just below 1; never land on a masked token.
      if (row(choice) < -1e8) row.maxCoeff(&choice);
    }
    if (choice == text::kEos) {
      out.stopped = true;
      out.stop_log_prob = row(choice);
      break;
    }
    out.tokens.push_back(static_cast<int>(choice));
    out.step_log_probs.push_back(row(choice));
  }
  return out;
}

}  // namespace

DecodeResult sample_decode(const GeneratorModel& gen, const TokenSequence& context, double temperature,
                           std::uint64_t seed) {
  if (temperature <= 0.0) return greedy_decode(gen, context);
  Rng rng(seed);
  return decode(gen, context, temperature, &rng);
}

DecodeResult greedy_decode(const GeneratorModel& gen, const TokenSequence& context) {
  return decode(gen, context, 0.0, nullptr);
}

std::vector<GenExample> make_gen_examples(const corpus::Corpus& corpus, std::span<const corpus::LooExample> loo,
                                          const GeneratorHyper& hyper) {
  std::vector<GenExample> out;
  out.reserve(loo.size());
  for (const auto& ex : loo) {
    const auto& target = corpus.review(ex.target_review).tokens;
    if (target.empty()) continue;
    std::vector<TokenSequence> ctx;
    for (auto it = ex.context_reviews.rbegin(); it != ex.context_reviews.rend(); ++it)
      ctx.emplace_back(corpus.review(*it).tokens);
    TokenSequence context = build_context(ctx, hyper.max_context_reviews, hyper.context_budget);
    if (context.empty()) continue;
    out.push_back({std::move(context), TokenSequence(target)});
  }
  return out;
}

double mean_token_nll(const GeneratorModel& gen, std::span<const GenExample> examples) {
  double total = 0.0, tokens = 0.0;
  for (const auto& ex : examples) {
    Graph g(false);
    total += gen.teacher_forced_nll(g, ex.context, ex.target).scalar();
    tokens += static_cast<double>(ex.target.size() + 1);
  }
  return tokens > 0.0 ? total / tokens : 0.0;
}

PretrainHistory pretrain_loo(GeneratorModel& gen, std::span<const GenExample> train, std::span<const GenExample> val) {
  if (train.empty()) throw DataError("no leave-one-out examples to pretrain the generator on");
  if (val.empty()) val = train;
  const GeneratorHyper& hyper = gen.hyper();
  ad::Adam opt({.lr = hyper.lr});
  auto& params = gen.parameters();
  params.zero_grad();
  Rng rng = make_rng(hyper.seed, "generator-pretrain");
  PretrainHistory hist;
  hist.best_val_nll = mean_token_nll(gen, val);
  auto best = params.snapshot();
  ad::DivergenceMonitor monitor(hyper.patience, std::log(static_cast<double>(gen.vocab_size())));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(std::max(1, hyper.batch_size));
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    double total = 0.0, tokens = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      Graph g;
      std::vector<Var> parts;
      double n = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = train[order[k]];
        parts.push_back(gen.teacher_forced_nll(g, ex.context, ex.target));
        n += static_cast<double>(ex.target.size() + 1);
      }
      Var loss = ad::scale(ad::sum(ad::concat_rows(parts)), 1.0 / n);
      total += loss.scalar() * n;
      tokens += n;
      g.backward(loss);
      opt.step(params);
    }
    hist.train_nll.push_back(total / tokens);
    const double v = mean_token_nll(gen, val);
    hist.val_nll.push_back(v);
    spdlog::debug("generator epoch {} train_nll {:.4f} val_nll {:.4f}", epoch, hist.train_nll.back(), v);
    if (std::isfinite(v) && (hist.best_epoch < 0 || v < hist.best_val_nll)) {
      hist.best_val_nll = v;
      hist.best_epoch = epoch;
      best = params.snapshot();
    }
    const auto signal = monitor.observe(v);
    if (signal == ad::TrainSignal::kDiverged)
      throw DivergenceError("generator pretraining diverged at epoch " + std::to_string(epoch));
    if (signal == ad::TrainSignal::kStop) break;
  }
  params.restore(best);
  return hist;
}

void save_generator(const GeneratorModel& gen, const std::string& stem, const std::string& vocab_hash,
                    const nlohmann::json& history, const nlohmann::json& extra) {
  ckpt::Sidecar s;
  s.kind = "generator";
  s.hyper = gen.hyper().to_json();
  s.vocab_hash = vocab_hash;
  s.seed = gen.hyper().seed;
  s.history = history;
  s.extra = extra;
  ckpt::save(stem, gen.parameters(), s);
}

std::unique_ptr<GeneratorModel> load_generator(const std::string& stem, const text::Vocabulary& vocab) {
  const auto s = ckpt::read_sidecar(stem);
  ckpt::require_vocab(s, vocab.hash(), "generator checkpoint");
  auto gen = std::make_unique<GeneratorModel>(GeneratorHyper::from_json(s.hyper), vocab.size());
  ckpt::load_parameters(gen->parameters(), stem + ".bin");
  return gen;
}

}  // namespace revshill::arg
