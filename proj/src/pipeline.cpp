#include "revshill/pipeline.hpp"
#include "revshill/checkpoint.hpp"
#include "revshill/errors.hpp"
#include "revshill/hashing.hpp"
#include "revshill/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace revshill::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path artifact(const config::ExperimentConfig& cfg, const std::string& name) { return fs::path(cfg.out) / name; }

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw MissingPrerequisite("cannot read " + p.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(p.string() + " is not valid JSON");
  return j;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// Collects hashes of what a command read and wrote.
class Manifest {
 public:
  Manifest(const config::ExperimentConfig& cfg, std::string command)
      : cfg_(cfg), command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& name) { inputs_[name] = sha256_file(artifact(cfg_, name).string()); }
  void external_input(const std::string& path) { inputs_[path] = sha256_file(path); }
  void output(const std::string& name) { outputs_[name] = sha256_file(artifact(cfg_, name).string()); }
  void checkpoint_output(const std::string& stem) {
    output(stem + ".bin");
    output(stem + ".json");
  }
  void checkpoint_input(const std::string& stem) {
    input(stem + ".bin");
    input(stem + ".json");
  }
  json& metrics() { return metrics_; }

  void write() const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json(artifact(cfg_, "manifest_" + command_ + ".json"),
               {{"command", command_},
                {"seed", cfg_.seed},
                {"config", cfg_.raw},
                {"inputs", inputs_},
                {"outputs", outputs_},
                {"metrics", metrics_},
                {"timings", {{"wall_seconds", seconds}}}});
  }

 private:
  const config::ExperimentConfig& cfg_;
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::object();
  json outputs_ = json::object();
  json metrics_ = json::object();
};

void require_checkpoint(const config::ExperimentConfig& cfg, const std::string& stem, const std::string& label,
                        const std::string& producer) {
  require(cfg, stem + ".json", label, producer);
  require(cfg, stem + ".bin", label, producer);
}

std::string mask_stem(const std::string& mask) { return "arg_" + mask; }

std::shared_ptr<rbrs::RbrsModel> load_recommender(const config::ExperimentConfig& cfg, const Dataset& ds,
                                                  const std::string& stem = "rbrs") {
  require_checkpoint(cfg, stem, stem == "rbrs" ? "rbrs checkpoint" : "adversarially trained rbrs checkpoint",
                     stem == "rbrs" ? "train-rbrs" : "adv-train");
  std::shared_ptr<rbrs::RbrsModel> m = rbrs::load_rbrs(artifact(cfg, stem).string(), ds.vocab);
  m->set_serving_cache(true);
  return m;
}

std::unique_ptr<lm::AutoregressiveLm> load_langmodel(const config::ExperimentConfig& cfg, const Dataset& ds) {
  require_checkpoint(cfg, "lm", "langmodel checkpoint", "train-lm");
  return lm::load_lm(artifact(cfg, "lm").string(), ds.vocab);
}

std::unique_ptr<abae::AspectModel> load_aspects(const config::ExperimentConfig& cfg, const Dataset& ds) {
  require_checkpoint(cfg, "abae", "abae checkpoint", "train-abae");
  return abae::load_abae(artifact(cfg, "abae").string(), ds.vocab);
}

std::shared_ptr<arg::GeneratorModel> load_arg(const config::ExperimentConfig& cfg, const Dataset& ds,
                                              const std::string& mask) {
  const std::string stem = mask_stem(mask);
  require_checkpoint(cfg, stem, "arg checkpoint for mask " + mask, "train-arg-" + mask);
  return arg::load_generator(artifact(cfg, stem).string(), ds.vocab);
}

std::vector<std::string> seeded_subset(std::vector<std::string> ids, std::size_t n, std::uint64_t seed,
                                       std::string_view label) {
  std::sort(ids.begin(), ids.end());
  if (n > 0 && ids.size() > n) {
    Rng rng = make_rng(seed, label);
    shuffle(ids.begin(), ids.end(), rng);
    ids.resize(n);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

// Items with at least one training review and one candidate user.
std::vector<std::string> attackable_items(const Dataset& ds, std::span<const std::size_t> pool) {
  std::set<std::string> ids;
  for (std::size_t i : pool) {
    const auto& item = ds.corpus.review(i).item_id;
    if (!ds.history.item_reviews(item).empty()) ids.insert(item);
  }
  std::vector<std::string> out;
  for (const auto& id : ids)
    if (!arg::eligible_users(ds.corpus, id).empty()) out.push_back(id);
  return out;
}

struct Serving {
  const Dataset* ds = nullptr;
  std::unordered_map<std::string, std::vector<std::size_t>> item_train;
  std::shared_ptr<rbrs::RbrsModel> model;
  std::unique_ptr<rbrs::BlackBoxRecommender> blackbox;

  eval::AttackEnv env(const config::ExperimentConfig& cfg) const {
    eval::AttackEnv e;
    e.corpus = &ds->corpus;
    e.history = &ds->history;
    e.item_train_reviews = &item_train;
    e.model = model;
    e.blackbox = blackbox.get();
    e.vocab = &ds->vocab;
    e.users_per_attack = cfg.baselines.users_per_attack;
    e.seed = derive_seed(cfg.seed, "attack");
    return e;
  }
};

Serving serve(const config::ExperimentConfig& cfg, const Dataset& ds) {
  Serving s;
  s.ds = &ds;
  s.item_train = eval::item_reviews_in(ds.corpus, ds.split.train);
  s.model = load_recommender(cfg, ds);
  s.blackbox = rbrs::black_box(s.model);
  return s;
}

std::unique_ptr<eval::Attacker> make_attacker(const config::ExperimentConfig& cfg, const Dataset& ds,
                                              const std::string& name, const std::string& mask) {
  if (name == "none") return std::make_unique<eval::NoOpAttacker>();
  if (name == "copycat") return std::make_unique<eval::CopycatAttacker>();
  if (name == "textbugger") return std::make_unique<eval::TextBuggerAttacker>(cfg.baselines.textbugger);
  if (name == "hotflip") {
    std::vector<text::TokenSequence> sentences;
    for (std::size_t i : ds.split.train) sentences.emplace_back(ds.corpus.review(i).tokens);
    auto tagger = std::make_shared<baselines::PosTagger>(baselines::PosTagger::fit(ds.vocab, sentences));
    return std::make_unique<eval::HotFlipAttacker>(tagger, cfg.baselines.hotflip);
  }
  if (name == "arg") return std::make_unique<eval::ArgAttacker>(report_name("arg", mask), load_arg(cfg, ds, mask));
  throw ConfigError("unknown attacker '" + name + "' (copycat, textbugger, hotflip, arg)");
}

eval::EvalConfig eval_config(const config::ExperimentConfig& cfg) {
  eval::EvalConfig e;
  e.max_users = cfg.eval.max_users;
  e.seed = derive_seed(cfg.seed, "eval");
  e.aspect_top_n = cfg.eval.aspect_top_n;
  return e;
}

json corpus_json(const Dataset& ds) {
  json reviews = json::array();
  for (const auto& r : ds.corpus.reviews())
    reviews.push_back({{"review_id", r.review_id},
                       {"user_id", r.user_id},
                       {"item_id", r.item_id},
                       {"rating", r.rating},
                       {"text", r.text},
                       {"tokens", r.tokens}});
  return reviews;
}

}  // namespace

std::string report_name(const std::string& attacker, const std::string& mask) {
  return attacker == "arg" ? "arg-" + mask : attacker;
}

void require(const config::ExperimentConfig& cfg, const std::string& file, const std::string& label,
             const std::string& producer) {
  const fs::path p = artifact(cfg, file);
  if (!fs::exists(p))
    throw MissingPrerequisite(label + " not found (" + p.string() + "); run " + producer + " first");
  const fs::path m = artifact(cfg, "manifest_" + producer + ".json");
  if (!fs::exists(m)) throw MissingPrerequisite(label + " has no manifest (" + m.string() + "); rerun " + producer);
  const json manifest = read_json(m);
  const auto& outputs = manifest.at("outputs");
  if (!outputs.contains(file) || outputs.at(file).get<std::string>() != sha256_file(p.string()))
    throw MissingPrerequisite(label + " (" + p.string() + ") does not match its manifest; rerun " + producer);
}

Dataset load_dataset(const config::ExperimentConfig& cfg) {
  require(cfg, "dataset.json", "dataset", "ingest");
  require(cfg, "vocab.json", "vocabulary", "ingest");
  Dataset ds;
  ds.vocab = text::Vocabulary::from_json(read_json(artifact(cfg, "vocab.json")));
  const json j = read_json(artifact(cfg, "dataset.json"));
  std::vector<corpus::Review> reviews;
  for (const auto& r : j.at("reviews")) {
    corpus::Review rv;
    rv.review_id = r.at("review_id").get<std::string>();
    rv.user_id = r.at("user_id").get<std::string>();
    rv.item_id = r.at("item_id").get<std::string>();
    rv.rating = r.at("rating").get<int>();
    rv.text = r.at("text").get<std::string>();
    rv.tokens = r.at("tokens").get<std::vector<int>>();
    reviews.push_back(std::move(rv));
  }
  ds.corpus = corpus::Corpus(std::move(reviews));
  const json& s = j.at("split");
  ds.split.train = s.at("train").get<std::vector<std::size_t>>();
  ds.split.val = s.at("val").get<std::vector<std::size_t>>();
  ds.split.test = s.at("test").get<std::vector<std::size_t>>();
  ds.split.seed = s.at("seed").get<std::uint64_t>();
  ds.history = rbrs::ReviewHistory::from_corpus(ds.corpus, ds.split.train);
  return ds;
}

std::vector<std::string> arg_training_items(const config::ExperimentConfig& cfg, const Dataset& ds) {
  return seeded_subset(attackable_items(ds, ds.split.train), cfg.arg_train_items, cfg.seed, "arg-train-items");
}

std::vector<std::string> eval_items(const config::ExperimentConfig& cfg, const Dataset& ds) {
  auto items = attackable_items(ds, ds.split.test);
  const std::size_t q = cfg.eval.q > 0 ? cfg.eval.q : std::min<std::size_t>(500, items.size());
  return seeded_subset(std::move(items), q, cfg.seed, "eval-items");
}

void cmd_ingest(const config::ExperimentConfig& cfg) {
  Manifest man(cfg, "ingest");
  auto ingested = corpus::ingest_jsonl(cfg.data.path, cfg.data.schema);
  man.external_input(cfg.data.path);
  corpus::Corpus raw = std::move(ingested.corpus);
  if (cfg.data.max_reviews > 0)
    raw = corpus::subsample_by_item(raw, cfg.data.max_reviews, cfg.data.min_group_size, cfg.split_seed);
  if (raw.empty()) throw DataError("no reviews left after ingestion");
  const auto split = corpus::split_corpus(raw, cfg.split_ratios, cfg.split_seed);
  const auto vocab = text::build_vocab(raw, split.train, cfg.data.vocab_min_freq, cfg.data.vocab_max_size);
  Dataset ds{text::tokenize_corpus(raw, vocab), split, vocab, {}};

  write_json(artifact(cfg, "vocab.json"), vocab.to_json());
  write_json(artifact(cfg, "dataset.json"),
             {{"reviews", corpus_json(ds)},
              {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}, {"seed", split.seed}}}});
  man.output("vocab.json");
  man.output("dataset.json");
  const auto& st = ingested.stats;
  man.metrics() = {{"lines", st.lines},
                   {"kept", st.kept},
                   {"dropped_rating", st.dropped_rating},
                   {"dropped_text", st.dropped_text},
                   {"dropped_missing_field", st.dropped_missing_field},
                   {"duplicates_replaced", st.duplicates_replaced},
                   {"reviews", ds.corpus.size()},
                   {"users", ds.corpus.n_users()},
                   {"items", ds.corpus.n_items()},
                   {"vocab_size", vocab.size()}};
  man.write();
  spdlog::info("ingest: {} reviews, {} users, {} items, vocabulary {}", ds.corpus.size(), ds.corpus.n_users(),
               ds.corpus.n_items(), vocab.size());
}

void cmd_train_rbrs(const config::ExperimentConfig& cfg) {
  Manifest man(cfg, "train-rbrs");
  const Dataset ds = load_dataset(cfg);
  man.input("dataset.json");
  man.input("vocab.json");
  auto model = rbrs::make_rbrs(cfg.rbrs, ds.vocab.size(), ds.corpus, ds.split.train);
  const auto hist = rbrs::train_rbrs(*model, ds.corpus, ds.split, ds.history);
  rbrs::save_rbrs(*model, artifact(cfg, "rbrs").string(), ds.vocab.hash(), hist);
  man.checkpoint_output("rbrs");
  const double test_mse = rbrs::rating_mse(*model, ds.corpus, ds.split.test, ds.history);
  man.metrics() = {{"test_mse", test_mse}, {"history", hist.to_json()}};
  man.write();
  spdlog::info("train-rbrs: {} test MSE {:.4f}", model->kind(), test_mse);
}

void cmd_train_lm(const config::ExperimentConfig& cfg) {
  Manifest man(cfg, "train-lm");
  const Dataset ds = load_dataset(cfg);
  man.input("dataset.json");
  man.input("vocab.json");
  lm::AutoregressiveLm model(cfg.lm, ds.vocab.size());
  const auto hist = lm::train_lm(model, ds.corpus, ds.split);
  lm::save_lm(model, artifact(cfg, "lm").string(), ds.vocab.hash(), hist);
  man.checkpoint_output("lm");
  double ppl = 0.0;
  std::size_t n = 0;
  for (std::size_t i : ds.split.test) {
    const text::TokenSequence seq(ds.corpus.review(i).tokens);
    if (seq.empty()) continue;
    ppl += lm::perplexity(model, seq);
    ++n;
  }
  man.metrics() = {{"test_ppl", n ? ppl / static_cast<double>(n) : 0.0}, {"history", hist.to_json()}};
  man.write();
  spdlog::info("train-lm: mean test perplexity {:.3f}", n ? ppl / static_cast<double>(n) : 0.0);
}

void cmd_train_abae(const config::ExperimentConfig& cfg) {
  Manifest man(cfg, "train-abae");
  const Dataset ds = load_dataset(cfg);
  man.input("dataset.json");
  man.input("vocab.json");
  abae::AbaeHistory hist;
  auto model = abae::train_abae(ds.corpus, ds.split, ds.vocab.size(), cfg.abae, &hist);
  abae::save_abae(*model, artifact(cfg, "abae").string(), ds.vocab.hash(), hist);
  write_json(artifact(cfg, "aspect_words.json"), abae::export_aspect_words(*model, ds.vocab, cfg.eval.aspect_top_n));
  man.checkpoint_output("abae");
  man.output("aspect_words.json");
  man.metrics() = hist.to_json();
  man.write();
}

void cmd_pretrain_arg(const config::ExperimentConfig& cfg) {
  Manifest man(cfg, "pretrain-arg");
  const Dataset ds = load_dataset(cfg);
  man.input("dataset.json");
  man.input("vocab.json");
  const corpus::Corpus train = ds.corpus.subset(ds.split.train);
  const auto val_items = seeded_subset(train.item_ids(), std::max<std::size_t>(1, train.n_items() / 10),
                                       cfg.generator.seed, "pretrain-val-items");
  const std::set<std::string> val_set(val_items.begin(), val_items.end());
  std::vector<std::string> train_ids, val_ids;
  for (const auto& id : train.item_ids()) (val_set.count(id) ? val_ids : train_ids).push_back(id);
  const auto loo_train = corpus::build_loo_examples(train, train_ids, cfg.data.min_group_size);
  const auto loo_val = corpus::build_loo_examples(train, val_ids, cfg.data.min_group_size);
  const auto ex_train = arg::make_gen_examples(train, loo_train, cfg.generator);
  auto ex_val = arg::make_gen_examples(train, loo_val, cfg.generator);
  if (ex_train.empty()) throw DataError("no leave-one-out examples; lower data.min_group_size");
  if (ex_val.empty()) ex_val = ex_train;
  arg::GeneratorModel gen(cfg.generator, ds.vocab.size());
  const auto hist = arg::pretrain_loo(gen, ex_train, ex_val);
  arg::save_generator(gen, artifact(cfg, "generator_pretrained").string(), ds.vocab.hash(), hist.to_json());
  man.checkpoint_output("generator_pretrained");
  man.metrics() = {{"train_examples", ex_train.size()}, {"val_examples", ex_val.size()}, {"history", hist.to_json()}};
  man.write();
}

void cmd_train_arg(const config::ExperimentConfig& cfg) {
  const std::string mask = cfg.arg.mask.name();
  Manifest man(cfg, "train-arg-" + mask);
  const Dataset ds = load_dataset(cfg);
  require_checkpoint(cfg, "generator_pretrained", "pretrained generator checkpoint", "pretrain-arg");
  Serving s = serve(cfg, ds);
  auto lm = load_langmodel(cfg, ds);
  auto aspects = load_aspects(cfg, ds);
  auto gen = arg::load_generator(artifact(cfg, "generator_pretrained").string(), ds.vocab);
  man.input("dataset.json");
  man.input("vocab.json");
  for (const char* stem : {"rbrs", "lm", "abae", "generator_pretrained"}) man.checkpoint_input(stem);

  arg::ArgTrainingData data;
  data.corpus = &ds.corpus;
  data.history = &ds.history;
  data.train_items = arg_training_items(cfg, ds);
  data.val_items = seeded_subset(data.train_items, cfg.arg_val_items, cfg.seed, "arg-val-items");
  const std::string log_name = mask_stem(mask) + "_steps.jsonl";
  std::ofstream log(artifact(cfg, log_name), std::ios::binary);
  const auto hist = arg::train_arg(*gen, data, *s.blackbox, *lm, *aspects, cfg.arg, &log);
  log.close();
  arg::save_generator(*gen, artifact(cfg, mask_stem(mask)).string(), ds.vocab.hash(), hist.to_json(),
                      {{"mask", mask}, {"attack_config", cfg.arg.to_json()}});
  man.checkpoint_output(mask_stem(mask));
  man.output(log_name);
  man.metrics() = {{"history", hist.to_json()},
                   {"train_items", data.train_items.size()},
                   {"val_items", data.val_items.size()},
                   {"blackbox_queries", s.blackbox->prediction_count()}};
  man.write();
}

void cmd_attack(const config::ExperimentConfig& cfg, const std::string& attacker) {
  const std::string mask = cfg.arg.mask.name();
  const std::string name = report_name(attacker, mask);
  Manifest man(cfg, "attack-" + name);
  const Dataset ds = load_dataset(cfg);
  Serving s = serve(cfg, ds);
  auto att = make_attacker(cfg, ds, attacker, mask);
  man.input("dataset.json");
  man.checkpoint_input("rbrs");
  if (attacker == "arg") man.checkpoint_input(mask_stem(mask));
  const auto env = s.env(cfg);
  std::ostringstream lines;
  for (const auto& item : eval_items(cfg, ds)) {
    try {
      lines << att->attack(item, env).to_json(ds.vocab).dump() << '\n';
    } catch (const DataError& e) {
      spdlog::warn("attack {}: skipping {}: {}", name, item, e.what());
    }
  }
  const std::string file = "attacks_" + name + ".jsonl";
  write_text(artifact(cfg, file), lines.str());
  man.output(file);
  man.write();
}

void cmd_eval(const config::ExperimentConfig& cfg, const std::optional<std::string>& attacker) {
  const Dataset ds = load_dataset(cfg);
  Serving s = serve(cfg, ds);
  auto lm = load_langmodel(cfg, ds);
  auto aspects = load_aspects(cfg, ds);
  const auto aspect_words = aspects->aspect_word_set(cfg.eval.aspect_top_n);
  const auto items = eval_items(cfg, ds);
  const auto env = s.env(cfg);
  const auto ecfg = eval_config(cfg);

  std::vector<std::pair<std::string, std::string>> plan;  // attacker, mask
  if (attacker) {
    plan.emplace_back(*attacker, cfg.arg.mask.name());
  } else {
    for (const char* b : {"copycat", "textbugger", "hotflip"}) plan.emplace_back(b, "");
    for (const auto& m : cfg.ablation_masks) plan.emplace_back("arg", arg::RewardMask::parse(m).name());
  }
  std::vector<eval::EvalReport> reports;
  for (const auto& [name, mask] : plan) {
    const std::string rname = report_name(name, mask);
    Manifest man(cfg, "eval-" + rname);
    auto att = make_attacker(cfg, ds, name, mask);
    man.input("dataset.json");
    man.checkpoint_input("rbrs");
    man.checkpoint_input("lm");
    man.checkpoint_input("abae");
    if (name == "arg") man.checkpoint_input(mask_stem(mask));
    const std::uint64_t before = s.blackbox->prediction_count();
    auto report = eval::evaluate_attack(*att, env, items, *lm, aspect_words, ecfg);
    const std::string file = "eval_" + rname + ".json";
    write_json(artifact(cfg, file), report.to_json());
    man.output(file);
    man.metrics() = {{"blackbox_queries", s.blackbox->prediction_count() - before}};
    man.write();
    reports.push_back(std::move(report));
  }

  Manifest man(cfg, "eval-human");
  const auto human = eval::human_reference_metrics(ds.corpus, ds.split, ds.history, *lm, aspect_words);
  write_json(artifact(cfg, "human.json"), human.to_json());
  man.input("dataset.json");
  man.checkpoint_input("lm");
  man.checkpoint_input("abae");
  man.output("human.json");
  man.write();
  std::cout << eval::render_table(reports, &human);
}

void cmd_adv_train(const config::ExperimentConfig& cfg) {
  Manifest man(cfg, "adv-train");
  const Dataset ds = load_dataset(cfg);
  Serving s = serve(cfg, ds);
  auto lm = load_langmodel(cfg, ds);
  auto aspects = load_aspects(cfg, ds);
  const auto aspect_words = aspects->aspect_word_set(cfg.eval.aspect_top_n);
  const std::string mask = cfg.arg.mask.name();
  auto augmenter = make_attacker(cfg, ds, cfg.advtrain.augmenter, mask);
  std::vector<std::unique_ptr<eval::Attacker>> owned;
  std::vector<const eval::Attacker*> attackers;
  for (const auto& n : cfg.advtrain.attackers) {
    owned.push_back(make_attacker(cfg, ds, n, mask));
    attackers.push_back(owned.back().get());
  }
  man.input("dataset.json");
  for (const char* stem : {"rbrs", "lm", "abae"}) man.checkpoint_input(stem);
  if (cfg.advtrain.augmenter == "arg" ||
      std::find(cfg.advtrain.attackers.begin(), cfg.advtrain.attackers.end(), "arg") != cfg.advtrain.attackers.end())
    man.checkpoint_input(mask_stem(mask));

  eval::AdvTrainSetup setup;
  setup.corpus = &ds.corpus;
  setup.split = &ds.split;
  setup.history = &ds.history;
  setup.factory = [&] { return rbrs::make_rbrs(cfg.rbrs, ds.vocab.size(), ds.corpus, ds.split.train); };
  setup.pre_model = s.model;
  setup.env = s.env(cfg);
  setup.train_items = attackable_items(ds, ds.split.train);
  setup.eval_items = eval_items(cfg, ds);
  setup.lm = lm.get();
  setup.aspect_words = &aspect_words;
  setup.eval = eval_config(cfg);
  std::shared_ptr<const rbrs::RbrsModel> post;
  const auto report = eval::adversarial_train(setup, *augmenter, attackers, &post);
  rbrs::save_rbrs(*post, artifact(cfg, "rbrs_at").string(), ds.vocab.hash(), {});
  write_json(artifact(cfg, "advtrain.json"), report.to_json());
  man.checkpoint_output("rbrs_at");
  man.output("advtrain.json");
  man.write();
  for (const auto& r : report.rows)
    spdlog::info("adv-train {}: PS {:.4f} -> {:.4f}", r.attacker, r.pre_ps, r.post_ps);
  spdlog::info("adv-train: MSE {:.4f} -> {:.4f}", report.pre_mse, report.post_mse);
}

namespace {

std::string fmt_num(const json& v, int prec) {
  if (v.is_null()) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v.get<double>();
  return os.str();
}

std::string pad(const std::string& s, std::size_t w, bool left = false) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

}  // namespace

void cmd_report(const config::ExperimentConfig& cfg) {
  Manifest man(cfg, "report");
  std::vector<std::string> names;
  if (fs::exists(cfg.out))
    for (const auto& entry : fs::directory_iterator(cfg.out)) {
      const std::string f = entry.path().filename().string();
      if (f.rfind("eval_", 0) == 0 && entry.path().extension() == ".json") names.push_back(f);
    }
  if (names.empty()) throw MissingPrerequisite("evaluation reports not found in " + cfg.out + "; run eval first");
  std::sort(names.begin(), names.end());

  std::ostringstream txt, csv;
  json summary = {{"attackers", json::array()}};
  txt << pad("attacker", 14, true) << pad("rbrs", 14, true) << pad("Q", 6) << pad("PS", 10) << pad("PS(raw)", 10)
      << pad("PPL", 10) << pad("Rel", 10) << pad("%AW", 10) << '\n';
  csv << "attacker,rbrs,q,ps,ps_unclipped,ppl,relevance,pct_aspect_words\n";
  csv << std::setprecision(17);
  for (const auto& f : names) {
    man.input(f);
    const json r = read_json(artifact(cfg, f));
    const json& a = r.at("aggregates");
    txt << pad(r.at("attacker").get<std::string>(), 14, true) << pad(r.at("rbrs").get<std::string>(), 14, true)
        << pad(std::to_string(r.at("q").get<std::size_t>()), 6) << pad(fmt_num(a.at("ps"), 4), 10)
        << pad(fmt_num(a.at("ps_unclipped"), 4), 10) << pad(fmt_num(a.at("ppl"), 2), 10)
        << pad(fmt_num(a.at("relevance"), 4), 10) << pad(fmt_num(a.at("pct_aspect_words"), 2), 10) << '\n';
    csv << r.at("attacker").get<std::string>() << ',' << r.at("rbrs").get<std::string>() << ','
        << r.at("q").get<std::size_t>() << ',' << a.at("ps").get<double>() << ','
        << a.at("ps_unclipped").get<double>() << ',' << a.at("ppl").get<double>() << ','
        << a.at("relevance").get<double>() << ',' << a.at("pct_aspect_words").get<double>() << '\n';
    summary["attackers"].push_back({{"attacker", r.at("attacker")}, {"rbrs", r.at("rbrs")}, {"q", r.at("q")},
                                    {"aggregates", a}});
  }
  if (fs::exists(artifact(cfg, "human.json"))) {
    man.input("human.json");
    const json h = read_json(artifact(cfg, "human.json"));
    txt << pad("human", 14, true) << pad("-", 14, true) << pad(std::to_string(h.at("reviews").get<std::size_t>()), 6)
        << pad("-", 10) << pad("-", 10) << pad(fmt_num(h.at("ppl"), 2), 10) << pad(fmt_num(h.at("relevance"), 4), 10)
        << pad(fmt_num(h.at("pct_aspect_words"), 2), 10) << '\n';
    summary["human"] = h;
  }
  if (fs::exists(artifact(cfg, "advtrain.json"))) {
    man.input("advtrain.json");
    const json at = read_json(artifact(cfg, "advtrain.json"));
    txt << "\nadversarial training (augmenter " << at.at("augment_source").get<std::string>() << ", "
        << at.at("augmented_items").get<std::size_t>() << " items)\n";
    txt << pad("attacker", 14, true) << pad("PS before", 12) << pad("PS after", 12) << pad("reduction%", 12) << '\n';
    for (const auto& row : at.at("rows"))
      txt << pad(row.at("attacker").get<std::string>(), 14, true) << pad(fmt_num(row.at("pre_ps"), 4), 12)
          << pad(fmt_num(row.at("post_ps"), 4), 12) << pad(fmt_num(row.at("reduction_pct"), 2), 12) << '\n';
    txt << "test MSE " << fmt_num(at.at("pre_mse"), 4) << " -> " << fmt_num(at.at("post_mse"), 4) << " ("
        << fmt_num(at.at("mse_change_pct"), 2) << "%)\n";
    summary["advtrain"] = {{"pre_mse", at.at("pre_mse")}, {"post_mse", at.at("post_mse")},
                           {"mse_change_pct", at.at("mse_change_pct")}, {"rows", at.at("rows")}};
  }
  write_text(artifact(cfg, "report.txt"), txt.str());
  write_text(artifact(cfg, "report.csv"), csv.str());
  write_json(artifact(cfg, "report.json"), summary);
  man.output("report.txt");
  man.output("report.csv");
  man.output("report.json");
  man.write();
  std::cout << txt.str();
}

void run_all(const config::ExperimentConfig& cfg) {
  cmd_ingest(cfg);
  cmd_train_rbrs(cfg);
  cmd_train_lm(cfg);
  cmd_train_abae(cfg);
  cmd_pretrain_arg(cfg);
  std::vector<std::string> masks;
  for (const auto& m : cfg.ablation_masks) masks.push_back(arg::RewardMask::parse(m).name());
  if (std::find(masks.begin(), masks.end(), cfg.arg.mask.name()) == masks.end()) masks.push_back(cfg.arg.mask.name());
  for (const auto& m : masks) {
    config::ExperimentConfig c = cfg;
    c.arg.mask = arg::RewardMask::parse(m);
    cmd_train_arg(c);
  }
  cmd_eval(cfg, std::nullopt);
  cmd_adv_train(cfg);
  cmd_report(cfg);
}

}  // namespace revshill::pipeline
