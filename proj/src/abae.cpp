#include "revshill/abae.hpp"

#include "revshill/checkpoint.hpp"
#include "revshill/errors.hpp"
#include "revshill/nn.hpp"
#include "revshill/optim.hpp"
#include "revshill/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace revshill::abae {

using ad::Graph;
using ad::Matrix;
using ad::Var;

AspectDistribution::AspectDistribution(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("aspect distribution must have at least one entry");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("aspect distribution has a negative or NaN entry");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("aspect distribution does not sum to 1");
}

std::size_t AspectDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(weights_.begin(), weights_.end()) - weights_.begin());
}

nlohmann::json AbaeHyper::to_json() const {
  return {{"aspects", aspects}, {"negatives", negatives}, {"ortho_weight", ortho_weight},
          {"embed_dim", embed_dim}, {"window", window},       {"lr", lr},
          {"epochs", epochs},     {"batch_size", batch_size}, {"patience", patience},
          {"seed", seed}};
}

AbaeHyper AbaeHyper::from_json(const nlohmann::json& j) {
  AbaeHyper h;
  h.aspects = j.value("aspects", h.aspects);
  h.negatives = j.value("negatives", h.negatives);
  h.ortho_weight = j.value("ortho_weight", h.ortho_weight);
  h.embed_dim = j.value("embed_dim", h.embed_dim);
  h.window = j.value("window", h.window);
  h.lr = j.value("lr", h.lr);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.patience = j.value("patience", h.patience);
  h.seed = j.value("seed", h.seed);
  return h;
}

nlohmann::json AbaeHistory::to_json() const {
  return {{"train_loss", train_loss},
          {"val_loss", val_loss},
          {"initial_orthogonality", initial_orthogonality},
          {"final_orthogonality", final_orthogonality},
          {"best_epoch", best_epoch}};
}

Matrix ppmi_svd_embeddings(std::span<const TokenSequence> sentences, std::size_t vocab_size, int dim, int window,
                           std::uint64_t seed) {
  const auto V = static_cast<Eigen::Index>(vocab_size);
  Matrix counts = Matrix::Zero(V, V);
  for (const auto& s : sentences) {
    std::vector<int> ids;
    for (int t : s)
      if (!text::is_special(t)) ids.push_back(t);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = i + 1; j < ids.size() && j <= i + static_cast<std::size_t>(window); ++j) {
        counts(ids[i], ids[j]) += 1.0;
        counts(ids[j], ids[i]) += 1.0;
      }
  }
  const Eigen::VectorXd row = counts.rowwise().sum();
  const double total = row.sum();
  Matrix ppmi = Matrix::Zero(V, V);
  if (total > 0.0) {
    for (Eigen::Index i = 0; i < V; ++i)
      for (Eigen::Index j = 0; j < V; ++j)
        if (counts(i, j) > 0.0) ppmi(i, j) = std::max(0.0, std::log(counts(i, j) * total / (row(i) * row(j))));
  }

  // Randomized range finder with two power iterations.
  const Eigen::Index sketch = std::min<Eigen::Index>(V, dim + 10);
  Rng rng = make_rng(seed, "ppmi-svd");
  Matrix y = ppmi * nn::gaussian(rng, V, sketch, 1.0);
  auto orth = [](const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    return Matrix(qr.householderQ() * Matrix::Identity(m.rows(), m.cols()));
  };
  Matrix q = orth(y);
  for (int it = 0; it < 2; ++it) q = orth(ppmi * orth(ppmi.transpose() * q));
  const Matrix b = q.transpose() * ppmi;
  Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU);
  const Matrix u = q * svd.matrixU();
  const Eigen::Index k = std::min<Eigen::Index>(dim, u.cols());
  Matrix emb = Matrix::Zero(V, dim);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd col = u.col(c) * std::sqrt(svd.singularValues()(c));
    // Fix the sign so the largest-magnitude entry is positive.
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0.0) col = -col;
    emb.col(c) = col;
  }
  for (Eigen::Index r = 0; r < V; ++r) {
    const double n = emb.row(r).norm();
    if (text::is_special(static_cast<int>(r)) || n < 1e-12)
      emb.row(r).setZero();
    else
      emb.row(r) /= n;
  }
  return emb;
}

AspectModel::AspectModel(const AbaeHyper& hyper, Matrix word_embeddings) : hyper_(hyper) {
  if (hyper.aspects < 1) throw ConfigError("abae.aspects must be at least 1");
  Rng rng = make_rng(hyper.seed, "abae-init");
  const Eigen::Index d = word_embeddings.cols();
  embeddings_ = &params_.add("word_embeddings", std::move(word_embeddings));
  embeddings_->frozen = true;
  attention_ = &params_.add("attention", nn::xavier(rng, d, d));
  weights_w_ = &params_.add("weights.w", nn::xavier(rng, d, hyper.aspects));
  weights_b_ = &params_.add("weights.b", Matrix::Zero(1, hyper.aspects));
  aspects_ = &params_.add("aspects", nn::gaussian(rng, hyper.aspects, d, 1.0));
  normalize_aspects();
}

void AspectModel::normalize_aspects() {
  Matrix& t = aspects_->value;
  for (Eigen::Index k = 0; k < t.rows(); ++k) {
    const double n = t.row(k).norm();
    if (n > 1e-12) t.row(k) /= n;
  }
}

std::vector<int> AspectModel::content_ids(const TokenSequence& seq) const {
  std::vector<int> ids;
  for (int t : seq)
    if (!text::is_special(t)) ids.push_back(t);
  return ids;
}

Var AspectModel::sentence_embedding(Graph& g, Var words) const {
  Var y = ad::mean_rows(words);
  Var d = ad::matmul(words, ad::matmul(g.param(*attention_), ad::transpose(y)));
  Var a = ad::softmax_rows(ad::transpose(d));
  return ad::matmul(a, words);
}

Var AspectModel::aspect_weights(Graph& g, Var sentence) const {
  return ad::softmax_rows(ad::add_row(ad::matmul(sentence, g.param(*weights_w_)), g.param(*weights_b_)));
}

Var AspectModel::reconstruct(Graph& g, Var weights) const { return ad::matmul(weights, g.param(*aspects_)); }

Var AspectModel::distribution_graph(Graph& g, Var words) const {
  return aspect_weights(g, sentence_embedding(g, words));
}

AspectDistribution AspectModel::distribution(const TokenSequence& review) const {
  if (review.empty()) throw std::invalid_argument("aspect distribution of an empty review");
  const auto ids = content_ids(review);
  const auto K = static_cast<std::size_t>(hyper_.aspects);
  if (ids.empty()) {
    spdlog::warn("review has no known words; using a uniform aspect distribution");
    return AspectDistribution(std::vector<double>(K, 1.0 / static_cast<double>(K)));
  }
  Graph g(false);
  const Matrix p = distribution_graph(g, ad::lookup_const(g, embeddings_->value, ids)).value();
  std::vector<double> w(p.data(), p.data() + p.size());
  // Renormalise away rounding so the simplex check is exact to 1e-12.
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return AspectDistribution(std::move(w));
}

Var max_margin_loss(Var reconstruction, Var sentence, Var negatives) {
  Graph& g = *reconstruction.graph;
  Var r = ad::l2_normalize_rows(reconstruction);
  Var z = ad::l2_normalize_rows(sentence);
  Var n = ad::l2_normalize_rows(negatives);
  Var pos = ad::sum(ad::mul(r, z));
  Var neg = ad::matmul(n, ad::transpose(r));
  Var pos_rows = ad::matmul(g.constant(Matrix::Ones(negatives.rows(), 1)), pos);
  return ad::sum(ad::relu(ad::add_scalar(ad::sub(neg, pos_rows), 1.0)));
}

Var AspectModel::orthogonality_penalty(Graph& g) const {
  Var t = ad::l2_normalize_rows(g.param(*aspects_));
  Var gram = ad::matmul(t, ad::transpose(t));
  Var diff = ad::sub(gram, g.constant(Matrix::Identity(hyper_.aspects, hyper_.aspects)));
  return ad::sqrt(ad::add_scalar(ad::sum(ad::square(diff)), 1e-12));
}

double AspectModel::orthogonality() const {
  Graph g(false);
  return orthogonality_penalty(g).scalar();
}

namespace {

Matrix negative_rows(const Matrix& embeddings, std::span<const TokenSequence> negatives) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(negatives.size()), embeddings.cols());
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    int n = 0;
    for (int t : negatives[k])
      if (!text::is_special(t)) {
        out.row(static_cast<Eigen::Index>(k)) += embeddings.row(t);
        ++n;
      }
    if (n > 0) out.row(static_cast<Eigen::Index>(k)) /= n;
  }
  return out;
}

}  // namespace

Var AspectModel::sample_loss(Graph& g, const TokenSequence& sentence, std::span<const TokenSequence> negatives) const {
  const auto ids = content_ids(sentence);
  if (ids.empty()) throw std::invalid_argument("sentence has no known words");
  if (negatives.empty()) throw std::invalid_argument("at least one negative sentence is required");
  Var words = ad::lookup(g, *embeddings_, ids);
  Var z = sentence_embedding(g, words);
  Var r = reconstruct(g, aspect_weights(g, z));
  Var hinge = max_margin_loss(r, z, g.constant(negative_rows(embeddings_->value, negatives)));
  return ad::add(hinge, ad::scale(orthogonality_penalty(g), hyper_.ortho_weight));
}

std::vector<int> AspectModel::top_words(int aspect, std::size_t n) const {
  if (aspect < 0 || aspect >= hyper_.aspects) throw std::out_of_range("aspect index out of range");
  const Matrix& e = embeddings_->value;
  const Eigen::RowVectorXd t = aspects_->value.row(aspect).normalized();
  std::vector<std::pair<double, int>> scored;
  for (Eigen::Index w = text::kNumSpecial; w < e.rows(); ++w) {
    const double norm = e.row(w).norm();
    const double cos = norm > 1e-12 ? e.row(w).dot(t) / norm : -2.0;
    scored.emplace_back(cos, static_cast<int>(w));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int> out;
  for (std::size_t k = 0; k < std::min(n, scored.size()); ++k) out.push_back(scored[k].second);
  return out;
}

std::unordered_set<int> AspectModel::aspect_word_set(std::size_t n) const {
  std::unordered_set<int> out;
  for (int k = 0; k < hyper_.aspects; ++k)
    for (int w : top_words(k, n)) out.insert(w);
  return out;
}

namespace {

// Spherical k-means over the unit-norm word vectors.
Matrix kmeans_centers(const Matrix& embeddings, int k, std::uint64_t seed) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < embeddings.rows(); ++r)
    if (embeddings.row(r).norm() > 1e-12) rows.push_back(r);
  Rng rng = make_rng(seed, "abae-kmeans");
  Matrix centers = nn::gaussian(rng, k, embeddings.cols(), 1.0);
  if (rows.size() >= static_cast<std::size_t>(k)) {
    std::vector<Eigen::Index> pool = rows;
    shuffle(pool.begin(), pool.end(), rng);
    for (int c = 0; c < k; ++c) centers.row(c) = embeddings.row(pool[static_cast<std::size_t>(c)]);
  }
  for (int it = 0; it < 20 && !rows.empty(); ++it) {
    Matrix sums = Matrix::Zero(k, embeddings.cols());
    for (Eigen::Index r : rows) {
      Eigen::Index best = 0;
      (centers * embeddings.row(r).transpose()).maxCoeff(&best);
      sums.row(best) += embeddings.row(r);
    }
    for (int c = 0; c < k; ++c)
      if (sums.row(c).norm() > 1e-12) centers.row(c) = sums.row(c);
    for (int c = 0; c < k; ++c) centers.row(c).normalize();
  }
  for (int c = 0; c < k; ++c) centers.row(c).normalize();
  return centers;
}

std::vector<TokenSequence> content_sentences(const corpus::Corpus& corpus, std::span<const std::size_t> indices) {
  std::vector<TokenSequence> out;
  for (std::size_t i : indices) {
    const auto& toks = corpus.review(i).tokens;
    if (std::any_of(toks.begin(), toks.end(), [](int t) { return !text::is_special(t); })) out.emplace_back(toks);
  }
  return out;
}

std::vector<TokenSequence> draw_negatives(const std::vector<TokenSequence>& pool, int m, Rng& rng) {
  std::vector<TokenSequence> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) out.push_back(pool[uniform_index(rng, pool.size())]);
  return out;
}

}  // namespace

std::unique_ptr<AspectModel> train_abae(const corpus::Corpus& corpus, const corpus::Split& split, std::size_t vocab_size,
                                        const AbaeHyper& hyper, AbaeHistory* history) {
  if (hyper.aspects < 1) throw ConfigError("abae.aspects must be at least 1");
  if (hyper.negatives < 1) throw ConfigError("abae.negatives must be at least 1");
  const auto train = content_sentences(corpus, split.train);
  auto val = content_sentences(corpus, split.val);
  if (train.empty()) throw DataError("aspect model training split has no usable reviews");
  if (val.empty()) val = train;

  auto model = std::make_unique<AspectModel>(
      hyper, ppmi_svd_embeddings(train, vocab_size, hyper.embed_dim, hyper.window, hyper.seed));
  model->parameters().get("aspects").value = kmeans_centers(model->word_embeddings(), hyper.aspects, hyper.seed);
  model->normalize_aspects();

  AbaeHistory hist;
  hist.initial_orthogonality = model->orthogonality();

  auto val_loss = [&] {
    Rng rng = make_rng(hyper.seed, "abae-val");
    double total = 0.0;
    for (const auto& s : val) {
      const auto neg = draw_negatives(train, hyper.negatives, rng);
      Graph g(false);
      total += model->sample_loss(g, s, neg).scalar();
    }
    return total / static_cast<double>(val.size());
  };

  ad::Adam opt({.lr = hyper.lr});
  auto& params = model->parameters();
  params.zero_grad();
  Rng rng = make_rng(hyper.seed, "abae-train");
  double best_val = val_loss();
  auto best = params.snapshot();
  ad::DivergenceMonitor monitor(hyper.patience, best_val);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(std::max(1, hyper.batch_size));
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      Graph g;
      std::vector<Var> losses;
      for (std::size_t k = start; k < end; ++k) {
        const auto neg = draw_negatives(train, hyper.negatives, rng);
        losses.push_back(model->sample_loss(g, train[order[k]], neg));
      }
      Var loss = ad::scale(ad::sum(ad::concat_rows(losses)), 1.0 / static_cast<double>(end - start));
      total += loss.scalar() * static_cast<double>(end - start);
      g.backward(loss);
      opt.step(params);
      model->normalize_aspects();
    }
    hist.train_loss.push_back(total / static_cast<double>(train.size()));
    const double v = val_loss();
    hist.val_loss.push_back(v);
    spdlog::debug("abae epoch {} train {:.4f} val {:.4f}", epoch, hist.train_loss.back(), v);
    if (std::isfinite(v) && (hist.best_epoch < 0 || v < best_val)) {
      best_val = v;
      hist.best_epoch = epoch;
      best = params.snapshot();
    }
    const auto signal = monitor.observe(v);
    if (signal == ad::TrainSignal::kDiverged)
      throw DivergenceError("aspect model validation loss diverged at epoch " + std::to_string(epoch));
    if (signal == ad::TrainSignal::kStop) break;
  }
  params.restore(best);
  hist.final_orthogonality = model->orthogonality();
  if (history) *history = hist;
  return model;
}

std::size_t select_target_index(const TokenSequence& generated, std::span<const TokenSequence> item_reviews) {
  if (item_reviews.empty()) throw std::invalid_argument("target selection needs at least one item review");
  if (item_reviews.size() == 1 || generated.empty()) return 0;
  std::size_t best = 0;
  double best_f1 = -1.0;
  for (std::size_t k = 0; k < item_reviews.size(); ++k) {
    const double f1 = item_reviews[k].empty() ? 0.0 : text::rouge1(generated, item_reviews[k]).f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      best = k;
    }
  }
  return best;
}

AspectDistribution select_target_distribution(const AspectModel& model, const TokenSequence& generated,
                                              std::span<const TokenSequence> item_reviews) {
  return model.distribution(item_reviews[select_target_index(generated, item_reviews)]);
}

double aspect_loss(const AspectDistribution& target, const AspectDistribution& generated) {
  if (target.size() != generated.size()) throw std::invalid_argument("aspect distributions differ in length");
  double total = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) total += std::abs(target[k] - generated[k]);
  return total;
}

nlohmann::json export_aspect_words(const AspectModel& model, const text::Vocabulary& vocab, std::size_t n) {
  nlohmann::json words = nlohmann::json::array();
  for (int k = 0; k < model.aspects(); ++k) {
    nlohmann::json list = nlohmann::json::array();
    for (int w : model.top_words(k, n)) list.push_back(vocab.token(w));
    words.push_back(list);
  }
  return {{"aspects", model.aspects()}, {"top_n", n}, {"words", words}};
}

void save_abae(const AspectModel& model, const std::string& stem, const std::string& vocab_hash,
               const AbaeHistory& history) {
  ckpt::Sidecar s;
  s.kind = "abae";
  s.hyper = model.hyper().to_json();
  s.vocab_hash = vocab_hash;
  s.seed = model.hyper().seed;
  s.history = history.to_json();
  ckpt::save(stem, model.parameters(), s);
}

std::unique_ptr<AspectModel> load_abae(const std::string& stem, const text::Vocabulary& vocab) {
  const auto s = ckpt::read_sidecar(stem);
  ckpt::require_vocab(s, vocab.hash(), "abae checkpoint");
  const AbaeHyper hyper = AbaeHyper::from_json(s.hyper);
  auto model = std::make_unique<AspectModel>(hyper, Matrix::Zero(static_cast<Eigen::Index>(vocab.size()), hyper.embed_dim));
  ckpt::load_parameters(model->parameters(), stem + ".bin");
  return model;
}

}  // namespace revshill::abae
