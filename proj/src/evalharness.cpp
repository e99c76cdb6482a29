#include "revshill/evalharness.hpp"
#include "revshill/errors.hpp"
#include "revshill/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace revshill::eval {

std::unordered_map<std::string, std::vector<std::size_t>> item_reviews_in(const corpus::Corpus& corpus,
                                                                          std::span<const std::size_t> indices) {
  std::unordered_map<std::string, std::vector<std::size_t>> out;
  std::vector<std::size_t> sorted(indices.begin(), indices.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i : sorted) out[corpus.review(i).item_id].push_back(i);
  return out;
}

std::vector<rbrs::UserQuery> attack_users(const AttackEnv& env, const std::string& item_id) {
  Rng rng = make_rng(env.seed, "attack-users:" + item_id);
  return arg::sample_candidate_users(*env.corpus, *env.history, item_id, env.users_per_attack, rng);
}

arg::ItemContext attack_context(const AttackEnv& env, const std::string& item_id, const arg::GeneratorHyper& hyper) {
  return arg::make_item_context(item_id, *env.history, hyper);
}

namespace {

const std::vector<std::size_t>& train_reviews_of(const AttackEnv& env, const std::string& item_id) {
  static const std::vector<std::size_t> kNone;
  if (!env.item_train_reviews) return kNone;
  auto it = env.item_train_reviews->find(item_id);
  return it == env.item_train_reviews->end() ? kNone : it->second;
}

AttackResult copy_seed(const AttackEnv& env, const std::string& item_id) {
  const auto& reviews = train_reviews_of(env, item_id);
  if (reviews.empty()) throw DataError("item " + item_id + " has no training review to start from");
  return baselines::copycat(*env.corpus, reviews, item_id, env.seed, *env.vocab);
}

}  // namespace

AttackResult NoOpAttacker::attack(const std::string& item_id, const AttackEnv&) const {
  AttackResult r;
  r.item_id = item_id;
  r.source = "none";
  return r;
}

AttackResult CopycatAttacker::attack(const std::string& item_id, const AttackEnv& env) const {
  return copy_seed(env, item_id);
}

AttackResult TextBuggerAttacker::attack(const std::string& item_id, const AttackEnv& env) const {
  if (!env.blackbox) throw std::invalid_argument("textbugger needs black-box access");
  const auto seed = copy_seed(env, item_id);
  const auto ctx = attack_context(env, item_id);
  const auto users = attack_users(env, item_id);
  return baselines::textbugger(*env.blackbox, ctx, users, seed, *env.vocab, options_);
}

AttackResult HotFlipAttacker::attack(const std::string& item_id, const AttackEnv& env) const {
  if (!env.model) throw std::invalid_argument("hotflip needs white-box access");
  const auto seed = copy_seed(env, item_id);
  const auto ctx = attack_context(env, item_id);
  const auto users = attack_users(env, item_id);
  return baselines::hotflip(env.model, ctx, users, seed, *env.vocab, *tagger_, options_);
}

AttackResult ArgAttacker::attack(const std::string& item_id, const AttackEnv& env) const {
  const auto ctx = attack_context(env, item_id, gen_->hyper());
  if (ctx.encoder_input.empty()) throw DataError("item " + item_id + " has no review to condition on");
  const auto decoded = arg::greedy_decode(*gen_, ctx.encoder_input);
  AttackResult r;
  r.item_id = item_id;
  r.source = "arg";
  r.attack_review = decoded.tokens;
  r.words = text::to_words(*env.vocab, decoded.tokens);
  return r;
}

nlohmann::json EvalConfig::to_json() const {
  return {{"max_users", max_users}, {"seed", seed}, {"aspect_top_n", aspect_top_n},
          {"user_policy", "users without a rating of the item, uniform sample without replacement when over the cap"}};
}

namespace {

nlohmann::json aggregates_json(const Aggregates& a) {
  return {{"ps", a.ps}, {"ps_unclipped", a.ps_unclipped}, {"ppl", a.ppl}, {"relevance", a.relevance},
          {"pct_aspect_words", a.pct_aspect_words}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json items_json = nlohmann::json::array();
  for (const auto& r : items) {
    items_json.push_back({{"item_id", r.item_id},
                          {"source", r.attack_source},
                          {"n_users", r.n_users},
                          {"ps", r.ps},
                          {"ps_unclipped", r.ps_unclipped},
                          {"ppl", r.ppl ? nlohmann::json(*r.ppl) : nlohmann::json(nullptr)},
                          {"relevance", r.relevance},
                          {"pct_aspect_words", r.pct_aspect_words},
                          {"attack_review", r.attack_text}});
  }
  nlohmann::json skipped_json = nlohmann::json::array();
  for (const auto& s : skipped) skipped_json.push_back({{"item_id", s.item_id}, {"reason", s.reason}});
  return {{"attacker", attacker}, {"rbrs", rbrs},          {"q", q()},
          {"config", config.to_json()}, {"aggregates", aggregates_json(aggregates)},
          {"items", items_json},  {"skipped", skipped_json}};
}

Aggregates aggregate(const std::vector<ItemRecord>& items) {
  Aggregates a;
  if (items.empty()) return a;
  std::size_t with_ppl = 0;
  for (const auto& r : items) {
    a.ps += r.ps;
    a.ps_unclipped += r.ps_unclipped;
    a.relevance += r.relevance;
    a.pct_aspect_words += r.pct_aspect_words;
    if (r.ppl) {
      a.ppl += *r.ppl;
      ++with_ppl;
    }
  }
  const double n = static_cast<double>(items.size());
  a.ps /= n;
  a.ps_unclipped /= n;
  a.relevance /= n;
  a.pct_aspect_words /= n;
  a.ppl = with_ppl ? a.ppl / static_cast<double>(with_ppl) : 0.0;
  return a;
}

std::vector<std::string> evaluation_users(const corpus::Corpus& corpus, const std::string& item_id,
                                          const EvalConfig& config) {
  auto pool = arg::eligible_users(corpus, item_id);
  if (pool.size() > config.max_users) {
    Rng rng = make_rng(config.seed, "eval-users:" + item_id);
    shuffle(pool.begin(), pool.end(), rng);
    pool.resize(config.max_users);
    std::sort(pool.begin(), pool.end());
  }
  return pool;
}

EvalReport evaluate_attack(const Attacker& attacker, const AttackEnv& env, std::span<const std::string> item_ids,
                           const lm::TokenScorer& lm, const std::unordered_set<int>& aspect_words,
                           const EvalConfig& config) {
  if (!env.model || !env.corpus || !env.history || !env.vocab)
    throw std::invalid_argument("evaluate_attack needs a model, corpus, history and vocabulary");
  EvalReport report;
  report.attacker = attacker.name();
  report.rbrs = env.model->kind();
  report.config = config;
  for (const auto& item_id : item_ids) {
    const auto& s_i = env.history->item_reviews(item_id);
    std::vector<TokenSequence> references;
    for (const auto& r : s_i)
      if (!r.tokens.empty()) references.push_back(r.tokens);
    if (references.empty()) {
      report.skipped.push_back({item_id, "no historical review"});
      continue;
    }
    const auto user_ids = evaluation_users(*env.corpus, item_id, config);
    if (user_ids.empty()) {
      report.skipped.push_back({item_id, "no candidate user"});
      continue;
    }
    AttackResult result;
    try {
      result = attacker.attack(item_id, env);
    } catch (const DataError& e) {
      spdlog::warn("{}: skipping item {}: {}", attacker.name(), item_id, e.what());
      report.skipped.push_back({item_id, e.what()});
      continue;
    }
    std::vector<rbrs::UserQuery> users;
    users.reserve(user_ids.size());
    for (const auto& u : user_ids) users.push_back({u, &env.history->user_reviews(u), ""});
    const TokenSequence& attack = result.attack_review;
    const auto base = env.model->predict_users(users, {item_id, &s_i, "", nullptr});
    const auto attacked = env.model->predict_users(users, {item_id, &s_i, "", &attack});

    ItemRecord rec;
    rec.item_id = item_id;
    rec.attack_source = result.source;
    rec.n_users = users.size();
    rec.user_shifts.reserve(users.size());
    for (std::size_t k = 0; k < users.size(); ++k) {
      const double shift = rbrs::clip_rating(attacked[k]) - rbrs::clip_rating(base[k]);
      rec.user_shifts.push_back(shift);
      rec.ps += shift;
      rec.ps_unclipped += attacked[k] - base[k];
    }
    rec.ps /= static_cast<double>(users.size());
    rec.ps_unclipped /= static_cast<double>(users.size());
    if (!attack.empty()) {
      rec.ppl = lm::perplexity(lm, attack);
      rec.relevance = text::mean_rouge1_f1(attack, references);
      rec.pct_aspect_words = 100.0 * text::aspect_word_percentage(attack, aspect_words);
    }
    rec.attack_text = text::detokenize(*env.vocab, attack);
    report.items.push_back(std::move(rec));
  }
  report.aggregates = aggregate(report.items);
  spdlog::info("eval {} on {}: Q={} PS={:.4f}", report.attacker, report.rbrs, report.q(), report.aggregates.ps);
  return report;
}

nlohmann::json HumanReference::to_json() const {
  return {{"reviews", reviews}, {"ppl", ppl}, {"relevance", relevance}, {"pct_aspect_words", pct_aspect_words}};
}

HumanReference human_reference_metrics(const corpus::Corpus& corpus, const corpus::Split& split,
                                       const rbrs::ReviewHistory& history, const lm::TokenScorer& lm,
                                       const std::unordered_set<int>& aspect_words) {
  HumanReference out;
  for (std::size_t i : split.test) {
    const auto& rv = corpus.review(i);
    if (rv.tokens.empty()) continue;
    const TokenSequence tokens(rv.tokens);
    std::vector<TokenSequence> references;
    for (const auto& r : history.item_reviews(rv.item_id))
      if (!r.tokens.empty() && r.review_id != rv.review_id) references.push_back(r.tokens);
    if (references.empty()) continue;
    out.ppl += lm::perplexity(lm, tokens);
    out.relevance += text::mean_rouge1_f1(tokens, references);
    out.pct_aspect_words += 100.0 * text::aspect_word_percentage(tokens, aspect_words);
    out.review_ids.push_back(rv.review_id);
  }
  out.reviews = out.review_ids.size();
  if (out.reviews > 0) {
    const double n = static_cast<double>(out.reviews);
    out.ppl /= n;
    out.relevance /= n;
    out.pct_aspect_words /= n;
  }
  return out;
}

nlohmann::json AdvTrainReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"attacker", r.attacker},
                         {"pre_ps", r.pre_ps},
                         {"post_ps", r.post_ps},
                         {"reduction_pct", r.reduction_pct ? nlohmann::json(*r.reduction_pct) : nlohmann::json(nullptr)}});
  nlohmann::json pre = nlohmann::json::array(), post = nlohmann::json::array();
  for (const auto& r : pre_reports) pre.push_back(r.to_json());
  for (const auto& r : post_reports) post.push_back(r.to_json());
  return {{"pre_mse", pre_mse},
          {"post_mse", post_mse},
          {"mse_change_pct", mse_change_pct()},
          {"augmented_items", augmented_items},
          {"augment_source", augment_source},
          {"rows", rows_json},
          {"pre_reports", pre},
          {"post_reports", post}};
}

AdvTrainReport adversarial_train(const AdvTrainSetup& setup, const Attacker& augmenter,
                                 const std::vector<const Attacker*>& attackers,
                                 std::shared_ptr<const rbrs::RbrsModel>* post_model) {
  if (!setup.corpus || !setup.split || !setup.history || !setup.factory || !setup.pre_model || !setup.lm ||
      !setup.aspect_words)
    throw std::invalid_argument("adversarial_train: incomplete setup");
  AdvTrainReport report;
  report.augment_source = augmenter.name();

  AttackEnv pre_env = setup.env;
  pre_env.corpus = setup.corpus;
  pre_env.history = setup.history;
  pre_env.model = setup.pre_model;
  auto pre_bb = rbrs::black_box(setup.pre_model);
  pre_env.blackbox = pre_bb.get();

  report.pre_mse = rbrs::rating_mse(*setup.pre_model, *setup.corpus, setup.split->test, *setup.history);
  for (const Attacker* a : attackers)
    report.pre_reports.push_back(
        evaluate_attack(*a, pre_env, setup.eval_items, *setup.lm, *setup.aspect_words, setup.eval));

  // Augmented S_i: one attack review per training item, generated against the
  // undefended model.
  rbrs::ReviewHistory augmented = *setup.history;
  for (const auto& item_id : setup.train_items) {
    AttackResult r;
    try {
      r = augmenter.attack(item_id, pre_env);
    } catch (const DataError& e) {
      spdlog::warn("adversarial training: no attack for {}: {}", item_id, e.what());
      continue;
    }
    if (r.attack_review.empty()) continue;
    augmented.append_item_review(item_id, {"adv:" + item_id, rbrs::kAttackerId, r.attack_review});
    ++report.augmented_items;
  }
  spdlog::info("adversarial training: {} items augmented with {}", report.augmented_items, augmenter.name());

  std::shared_ptr<rbrs::RbrsModel> hardened = setup.factory();
  rbrs::train_rbrs(*hardened, *setup.corpus, *setup.split, augmented);
  std::shared_ptr<const rbrs::RbrsModel> post = hardened;
  report.post_mse = rbrs::rating_mse(*post, *setup.corpus, setup.split->test, *setup.history);

  AttackEnv post_env = pre_env;
  post_env.model = post;
  auto post_bb = rbrs::black_box(post);
  post_env.blackbox = post_bb.get();
  for (const Attacker* a : attackers)
    report.post_reports.push_back(
        evaluate_attack(*a, post_env, setup.eval_items, *setup.lm, *setup.aspect_words, setup.eval));

  for (std::size_t k = 0; k < attackers.size(); ++k) {
    AdvTrainRow row;
    row.attacker = attackers[k]->name();
    row.pre_ps = report.pre_reports[k].aggregates.ps;
    row.post_ps = report.post_reports[k].aggregates.ps;
    if (row.pre_ps > 0.0) row.reduction_pct = 100.0 * (row.pre_ps - row.post_ps) / row.pre_ps;
    report.rows.push_back(row);
  }
  if (post_model) *post_model = post;
  return report;
}

namespace {

std::string fixed(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

std::string render_table(const std::vector<EvalReport>& reports, const HumanReference* human) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "attacker" << std::setw(14) << "rbrs" << std::right << std::setw(6) << "Q"
     << std::setw(10) << "PS" << std::setw(10) << "PPL" << std::setw(10) << "Rel" << std::setw(10) << "%AW" << '\n';
  for (const auto& r : reports) {
    os << std::left << std::setw(14) << r.attacker << std::setw(14) << r.rbrs << std::right << std::setw(6) << r.q()
       << std::setw(10) << fixed(r.aggregates.ps, 4) << std::setw(10) << fixed(r.aggregates.ppl, 2) << std::setw(10)
       << fixed(r.aggregates.relevance, 4) << std::setw(10) << fixed(r.aggregates.pct_aspect_words, 2) << '\n';
  }
  if (human) {
    os << std::left << std::setw(14) << "human" << std::setw(14) << "-" << std::right << std::setw(6) << human->reviews
       << std::setw(10) << "-" << std::setw(10) << fixed(human->ppl, 2) << std::setw(10)
       << fixed(human->relevance, 4) << std::setw(10) << fixed(human->pct_aspect_words, 2) << '\n';
  }
  return os.str();
}

std::string render_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "attacker,rbrs,item_id,n_users,ps,ps_unclipped,ppl,relevance,pct_aspect_words\n";
  os << std::setprecision(17);
  for (const auto& r : reports)
    for (const auto& it : r.items) {
      os << r.attacker << ',' << r.rbrs << ',' << it.item_id << ',' << it.n_users << ',' << it.ps << ','
         << it.ps_unclipped << ',';
      if (it.ppl) os << *it.ppl;
      os << ',' << it.relevance << ',' << it.pct_aspect_words << '\n';
    }
  return os.str();
}

}  // namespace revshill::eval
