#include "revshill/langmodel.hpp"

#include "revshill/checkpoint.hpp"
#include "revshill/errors.hpp"
#include "revshill/optim.hpp"
#include "revshill/random.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>

namespace revshill::lm {

using ad::Graph;
using ad::Matrix;
using ad::Var;

namespace {

void check_length(const TokenSequence& seq) {
  if (seq.empty()) throw std::invalid_argument("perplexity of an empty sequence is undefined");
  if (seq.size() > text::kMaxSequenceLength) throw std::invalid_argument("sequence longer than 128 tokens");
}

std::vector<int> targets_of(const TokenSequence& seq) {
  std::vector<int> t(seq.begin(), seq.end());
  t.push_back(text::kEos);
  return t;
}

}  // namespace

std::vector<double> TokenScorer::step_log_probs(const TokenSequence& seq) const {
  const Matrix logp = log_distributions(seq);
  const auto targets = targets_of(seq);
  std::vector<double> out(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) out[t] = logp(static_cast<Eigen::Index>(t), targets[t]);
  return out;
}

Matrix UniformScorer::log_distributions(const TokenSequence& seq) const {
  return Matrix::Constant(static_cast<Eigen::Index>(seq.size() + 1), static_cast<Eigen::Index>(vocab_size_),
                          -std::log(static_cast<double>(vocab_size_)));
}

nlohmann::json LmHyper::to_json() const {
  return {{"dim", dim},     {"heads", heads},   {"layers", layers},         {"ff_dim", ff_dim},     {"lr", lr},
          {"epochs", epochs}, {"batch_size", batch_size}, {"patience", patience}, {"seed", seed}};
}

LmHyper LmHyper::from_json(const nlohmann::json& j) {
  LmHyper h;
  h.dim = j.value("dim", h.dim);
  h.heads = j.value("heads", h.heads);
  h.layers = j.value("layers", h.layers);
  h.ff_dim = j.value("ff_dim", h.ff_dim);
  h.lr = j.value("lr", h.lr);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.patience = j.value("patience", h.patience);
  h.seed = j.value("seed", h.seed);
  return h;
}

nlohmann::json LmHistory::to_json() const {
  return {{"train_nll", train_nll}, {"val_nll", val_nll}, {"best_epoch", best_epoch}, {"best_val_nll", best_val_nll}};
}

AutoregressiveLm::AutoregressiveLm(const LmHyper& hyper, std::size_t vocab_size)
    : hyper_(hyper), vocab_size_(vocab_size) {
  if (hyper.dim % hyper.heads != 0) throw ConfigError("lm.dim must be divisible by lm.heads");
  Rng rng = make_rng(hyper.seed, "lm-init");
  const auto V = static_cast<Eigen::Index>(vocab_size);
  embedding_ = &params_.add("embedding", nn::gaussian(rng, V, hyper.dim, 0.1));
  positions_ = &params_.add("positions", nn::gaussian(rng, text::kMaxSequenceLength + 1, hyper.dim, 0.02));
  for (int l = 0; l < hyper.layers; ++l)
    layers_.push_back(
        nn::TransformerLayer::create(params_, "layer" + std::to_string(l), hyper.dim, hyper.ff_dim, hyper.heads, false, rng));
  final_norm_ = nn::LayerNorm::create(params_, "final_norm", hyper.dim);
  head_ = nn::Linear::create(params_, "head", hyper.dim, V, rng);
}

Var AutoregressiveLm::logits(Graph& g, const TokenSequence& seq) const {
  check_length(seq);
  std::vector<int> inputs{text::kBos};
  inputs.insert(inputs.end(), seq.begin(), seq.end());
  std::vector<int> pos(inputs.size());
  std::iota(pos.begin(), pos.end(), 0);
  Var x = ad::add(ad::lookup(g, *embedding_, inputs), ad::lookup(g, *positions_, pos));
  const Matrix mask = ad::causal_mask(static_cast<Eigen::Index>(inputs.size()));
  for (const auto& layer : layers_) x = layer(g, x, &mask, nullptr);
  return head_(g, final_norm_(g, x));
}

Matrix AutoregressiveLm::log_distributions(const TokenSequence& seq) const {
  Graph g(false);
  return ad::log_softmax_rows(logits(g, seq)).value();
}

Var AutoregressiveLm::nll(Graph& g, const TokenSequence& seq) const {
  const auto targets = targets_of(seq);
  Var logp = ad::log_softmax_rows(logits(g, seq));
  return ad::scale(ad::sum(ad::pick(logp, targets)), -1.0);
}

Var lm_batch_loss(Graph& g, const AutoregressiveLm& lm, std::span<const TokenSequence> batch) {
  std::vector<Var> parts;
  double tokens = 0.0;
  for (const auto& seq : batch) {
    parts.push_back(lm.nll(g, seq));
    tokens += static_cast<double>(seq.size() + 1);
  }
  return ad::scale(ad::sum(ad::concat_rows(parts)), 1.0 / tokens);
}

namespace {

std::vector<TokenSequence> sequences(const corpus::Corpus& corpus, std::span<const std::size_t> indices) {
  std::vector<TokenSequence> out;
  for (std::size_t i : indices) {
    const auto& toks = corpus.review(i).tokens;
    if (!toks.empty()) out.emplace_back(toks);
  }
  return out;
}

double mean_nll(const AutoregressiveLm& lm, const std::vector<TokenSequence>& seqs) {
  double total = 0.0, tokens = 0.0;
  for (const auto& s : seqs) {
    Graph g(false);
    total += lm.nll(g, s).scalar();
    tokens += static_cast<double>(s.size() + 1);
  }
  return tokens > 0.0 ? total / tokens : 0.0;
}

}  // namespace

LmHistory train_lm(AutoregressiveLm& lm, const corpus::Corpus& corpus, const corpus::Split& split) {
  const LmHyper& hyper = lm.hyper();
  const auto train = sequences(corpus, split.train);
  auto val = sequences(corpus, split.val);
  if (train.empty()) throw DataError("language model training split is empty");
  if (val.empty()) val = train;

  ad::Adam opt({.lr = hyper.lr});
  auto& params = lm.parameters();
  params.zero_grad();
  Rng rng = make_rng(hyper.seed, "lm-train");
  LmHistory hist;
  const double baseline = std::log(static_cast<double>(lm.vocab_size()));
  hist.best_val_nll = mean_nll(lm, val);
  auto best = params.snapshot();
  ad::DivergenceMonitor monitor(hyper.patience, baseline);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(std::max(1, hyper.batch_size));
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    double total = 0.0, tokens = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<TokenSequence> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) batch.push_back(train[order[k]]);
      Graph g;
      Var loss = lm_batch_loss(g, lm, batch);
      double n = 0.0;
      for (const auto& s : batch) n += static_cast<double>(s.size() + 1);
      total += loss.scalar() * n;
      tokens += n;
      g.backward(loss);
      opt.step(params);
    }
    hist.train_nll.push_back(total / tokens);
    const double v = mean_nll(lm, val);
    hist.val_nll.push_back(v);
    spdlog::debug("lm epoch {} train_nll {:.4f} val_nll {:.4f}", epoch, hist.train_nll.back(), v);
    if (std::isfinite(v) && (hist.best_epoch < 0 || v < hist.best_val_nll)) {
      hist.best_val_nll = v;
      hist.best_epoch = epoch;
      best = params.snapshot();
    }
    const auto signal = monitor.observe(v);
    if (signal == ad::TrainSignal::kDiverged)
      throw DivergenceError("language model validation loss diverged at epoch " + std::to_string(epoch));
    if (signal == ad::TrainSignal::kStop) break;
  }
  params.restore(best);
  return hist;
}

double perplexity(const TokenScorer& lm, const TokenSequence& seq) {
  check_length(seq);
  const auto lp = lm.step_log_probs(seq);
  const double total = std::accumulate(lp.begin(), lp.end(), 0.0);
  return std::exp(-total / static_cast<double>(lp.size()));
}

double inverse_perplexity(const TokenScorer& lm, const TokenSequence& seq) { return 1.0 / perplexity(lm, seq); }

void save_lm(const AutoregressiveLm& lm, const std::string& stem, const std::string& vocab_hash,
             const LmHistory& history) {
  ckpt::Sidecar s;
  s.kind = "langmodel";
  s.hyper = lm.hyper().to_json();
  s.vocab_hash = vocab_hash;
  s.seed = lm.hyper().seed;
  s.history = history.to_json();
  ckpt::save(stem, lm.parameters(), s);
}

std::unique_ptr<AutoregressiveLm> load_lm(const std::string& stem, const text::Vocabulary& vocab) {
  const auto s = ckpt::read_sidecar(stem);
  ckpt::require_vocab(s, vocab.hash(), "langmodel checkpoint");
  auto lm = std::make_unique<AutoregressiveLm>(LmHyper::from_json(s.hyper), vocab.size());
  ckpt::load_parameters(lm->parameters(), stem + ".bin");
  return lm;
}

}  // namespace revshill::lm
