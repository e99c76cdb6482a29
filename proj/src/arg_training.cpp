#include "revshill/arg.hpp"
#include "revshill/errors.hpp"
#include "revshill/optim.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>
#include <ostream>

namespace revshill::arg {

using ad::Graph;
using ad::Matrix;
using ad::Var;

Var scst_loss(Graph& g, const GeneratorModel& gen, Var memory, const DecodeResult& sampled,
              const DecodeResult& greedy, const RewardBundle& r_sampled, const RewardBundle& r_greedy,
              double temperature) {
  if (sampled.mode != DecodeMode::kSampled) throw std::invalid_argument("scst_loss: first decode must be sampled");
  if (greedy.mode != DecodeMode::kGreedy) throw std::invalid_argument("scst_loss: baseline decode must be greedy");
  const double advantage = r_sampled.total - r_greedy.total;
  if (advantage == 0.0) return g.constant(Matrix::Zero(1, 1));
  Var logp = gen.sequence_log_prob(g, memory, sampled.tokens, sampled.stopped, temperature);
  return ad::scale(logp, -advantage);
}

Var relaxed_aspect_loss(Graph& g, const GeneratorModel& gen, Var memory, const TokenSequence& tokens,
                        const abae::AspectModel& abae, const abae::AspectDistribution& target, double temperature) {
  if (tokens.empty()) return g.constant(Matrix::Zero(1, 1));
  if (target.size() != static_cast<std::size_t>(abae.aspects()))
    throw std::invalid_argument("target aspect distribution has the wrong length");
  Var lp = gen.decoder_log_probs(g, memory, tokens, temperature);
  Var probs = ad::exp(ad::slice_rows(lp, 0, static_cast<Eigen::Index>(tokens.size())));
  Var words = ad::matmul(probs, g.constant_ref(abae.word_embeddings()));
  Var phi = abae.distribution_graph(g, words);
  Matrix t(1, static_cast<Eigen::Index>(target.size()));
  for (std::size_t k = 0; k < target.size(); ++k) t(0, static_cast<Eigen::Index>(k)) = target[k];
  return ad::sum(ad::abs(ad::sub(phi, g.constant(std::move(t)))));
}

Var total_loss(Var l_scst, Var l_aspect, double lambda) {
  if (lambda == 1.0) return l_scst;
  return ad::add(ad::scale(l_scst, lambda), ad::scale(l_aspect, 1.0 - lambda));
}

nlohmann::json ArgHistory::to_json() const {
  return {{"val_reward", val_reward}, {"val_ps", val_ps},   {"best_epoch", best_epoch},
          {"best_val_reward", best_val_reward}, {"steps", steps}, {"skipped", skipped}};
}

namespace {

struct PreparedItem {
  ItemContext ctx;
  std::size_t index = 0;
};

std::vector<PreparedItem> prepare(const ArgTrainingData& data, const std::vector<std::string>& ids,
                                  const GeneratorHyper& hyper) {
  std::vector<PreparedItem> out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    ItemContext ctx = make_item_context(ids[k], *data.history, hyper);
    if (ctx.review_tokens.empty() || ctx.encoder_input.empty()) continue;
    if (eligible_users(*data.corpus, ids[k]).empty()) continue;
    out.push_back({std::move(ctx), k});
  }
  return out;
}

}  // namespace

ArgHistory train_arg(GeneratorModel& gen, const ArgTrainingData& data, const rbrs::BlackBoxRecommender& blackbox,
                     const lm::TokenScorer& lm, const abae::AspectModel& abae, const AttackConfig& config,
                     std::ostream* step_log) {
  config.validate();
  if (!data.corpus || !data.history) throw std::invalid_argument("train_arg needs a corpus and a review history");
  const auto train = prepare(data, data.train_items, gen.hyper());
  auto val = prepare(data, data.val_items, gen.hyper());
  if (train.empty()) throw DataError("no attackable training items");
  if (val.empty()) val = train;
  const double lambda = config.mask.aspect ? config.lambda : 1.0;

  std::vector<std::vector<rbrs::UserQuery>> val_users;
  for (const auto& item : val) {
    Rng rng = make_rng(config.seed, "arg-val-users", item.index);
    val_users.push_back(
        sample_candidate_users(*data.corpus, *data.history, item.ctx.item_id, config.users_per_reward, rng));
  }
  auto validate = [&](double* mean_ps) {
    double total = 0.0, ps = 0.0;
    for (std::size_t k = 0; k < val.size(); ++k) {
      const auto greedy = greedy_decode(gen, val[k].ctx.encoder_input);
      const auto r = compute_rewards(greedy.tokens, val[k].ctx, val_users[k], blackbox, lm, config);
      total += r.bundle.total;
      ps += r.measured.ps;
    }
    *mean_ps = ps / static_cast<double>(val.size());
    return total / static_cast<double>(val.size());
  };

  ad::Adam opt({.lr = config.lr, .clip_norm = 1.0});
  auto& params = gen.parameters();
  params.zero_grad();
  Rng order_rng = make_rng(config.seed, "arg-order");
  ArgHistory hist;
  std::vector<ad::Matrix> best;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), order_rng);
    int pending = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const PreparedItem& item = train[order[pos]];
      const std::uint64_t step = hist.steps++;
      Rng user_rng = make_rng(config.seed, "arg-train-users",
                              static_cast<std::uint64_t>(epoch) * 1000003ULL + item.index);
      const auto users =
          sample_candidate_users(*data.corpus, *data.history, item.ctx.item_id, config.users_per_reward, user_rng);
      const auto sampled = sample_decode(gen, item.ctx.encoder_input, config.temperature,
                                         derive_seed(config.seed, "arg-sample", step));
      const auto greedy = greedy_decode(gen, item.ctx.encoder_input);
      nlohmann::json rec = {{"step", step}, {"epoch", epoch}, {"item_id", item.ctx.item_id}};
      if (sampled.tokens.empty()) {
        ++hist.skipped;
        rec["skipped"] = "empty decode";
        if (step_log) *step_log << rec.dump() << '\n';
        continue;
      }
      const auto rs = compute_rewards(sampled.tokens, item.ctx, users, blackbox, lm, config);
      const auto rg = compute_rewards(greedy.tokens, item.ctx, users, blackbox, lm, config);
      if (!std::isfinite(rs.bundle.total) || !std::isfinite(rg.bundle.total)) {
        ++hist.skipped;
        rec["skipped"] = "non-finite reward";
        if (step_log) *step_log << rec.dump() << '\n';
        continue;
      }
      Graph g;
      Var memory = gen.encode(g, item.ctx.encoder_input);
      Var l_scst = scst_loss(g, gen, memory, sampled, greedy, rs.bundle, rg.bundle, config.temperature);
      Var l_aspect = g.constant(Matrix::Zero(1, 1));
      if (lambda < 1.0) {
        const auto target = abae::select_target_distribution(abae, sampled.tokens, item.ctx.review_tokens);
        l_aspect = relaxed_aspect_loss(g, gen, memory, sampled.tokens, abae, target, config.temperature);
      }
      Var loss = total_loss(l_scst, l_aspect, lambda);
      if (!std::isfinite(loss.scalar())) {
        ++hist.skipped;
        rec["skipped"] = "non-finite loss";
        if (step_log) *step_log << rec.dump() << '\n';
        continue;
      }
      g.backward(ad::scale(loss, 1.0 / static_cast<double>(config.batch_items)));
      rec["ps"] = rs.measured.ps;
      rec["inv_ppl"] = rs.measured.inv_ppl;
      rec["relevance"] = rs.measured.relevance;
      rec["reward"] = rs.bundle.total;
      rec["greedy_reward"] = rg.bundle.total;
      rec["l_scst"] = l_scst.scalar();
      rec["l_aspect"] = l_aspect.scalar();
      if (step_log) *step_log << rec.dump() << '\n';
      if (++pending == config.batch_items) {
        opt.step(params);
        pending = 0;
      }
    }
    if (pending > 0) opt.step(params);
    double val_ps = 0.0;
    const double v = validate(&val_ps);
    hist.val_reward.push_back(v);
    hist.val_ps.push_back(val_ps);
    spdlog::info("arg[{}] epoch {} val reward {:.4f} val ps {:.4f}", config.mask.name(), epoch, v, val_ps);
    if (std::isfinite(v) && (hist.best_epoch < 0 || v > hist.best_val_reward)) {
      hist.best_val_reward = v;
      hist.best_epoch = epoch;
      best = params.snapshot();
    }
  }
  if (!best.empty()) params.restore(best);
  return hist;
}

}  // namespace revshill::arg
