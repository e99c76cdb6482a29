#include "revshill/baselines.hpp"

#include "revshill/errors.hpp"
#include "revshill/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <unordered_set>

namespace revshill::baselines {

nlohmann::json AttackResult::to_json(const text::Vocabulary& vocab) const {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& ed : edits)
    e.push_back({{"position", ed.position}, {"kind", ed.kind}, {"old", ed.old_word}, {"new", ed.new_word}});
  std::string joined;
  for (const auto& w : words) joined += (joined.empty() ? "" : " ") + w;
  return {{"item_id", item_id},
          {"source", source},
          {"text", joined},
          {"tokens", attack_review.ids()},
          {"detokenized", text::detokenize(vocab, attack_review)},
          {"queries_used", queries_used},
          {"edits", e},
          {"fallback", fallback}};
}

AttackResult copycat(const corpus::Corpus& corpus, std::span<const std::size_t> item_reviews,
                     const std::string& item_id, std::uint64_t seed, const text::Vocabulary& vocab) {
  if (item_reviews.empty()) throw DataError("copycat: item " + item_id + " has no reviews to copy");
  std::vector<std::size_t> five;
  for (std::size_t i : item_reviews)
    if (corpus.review(i).rating == 5) five.push_back(i);
  AttackResult r;
  r.item_id = item_id;
  r.source = "copycat";
  std::size_t chosen = 0;
  if (!five.empty()) {
    Rng rng = make_rng(seed, "copycat:" + item_id);
    chosen = five[uniform_index(rng, five.size())];
  } else {
    chosen = *std::max_element(item_reviews.begin(), item_reviews.end(), [&](std::size_t a, std::size_t b) {
      return corpus.review(a).rating < corpus.review(b).rating;
    });
    r.fallback = true;
    spdlog::warn("copycat: item {} has no five-star review; copying a {}-star review", item_id,
                 corpus.review(chosen).rating);
  }
  r.words = text::split_words(corpus.review(chosen).text);
  if (r.words.size() > text::kMaxSequenceLength) r.words.resize(text::kMaxSequenceLength);
  r.attack_review = text::tokenize_words(vocab, r.words);
  return r;
}

// ---------------------------------------------------------------------------
// Part-of-speech heuristics

namespace {

const std::unordered_map<std::string, std::string>& closed_class() {
  static const std::unordered_map<std::string, std::string> table = [] {
    std::unordered_map<std::string, std::string> t;
    auto put = [&](const char* tag, std::initializer_list<const char*> words) {
      for (const char* w : words) t.emplace(w, tag);
    };
    put("DET", {"the", "a", "an", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our",
                "their", "some", "any", "every", "each", "no"});
    put("PRON", {"i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "myself", "itself"});
    put("ADP", {"of", "in", "on", "at", "for", "with", "from", "by", "about", "into", "over", "after", "before",
                "under", "between", "through", "during", "without", "to"});
    put("CONJ", {"and", "or", "but", "so", "because", "although", "though", "while", "if", "than"});
    put("AUX", {"is", "was", "are", "were", "be", "been", "being", "am", "do", "does", "did", "have", "has", "had",
                "will", "would", "can", "could", "should", "may", "might", "must"});
    put("NEG", {"not", "never"});
    return t;
  }();
  return table;
}

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() > suffix.size() + 1 && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

const std::unordered_set<std::string> kAdjectiveCues = {"is",  "was",    "are",   "were",      "be",
                                                        "very", "so",    "really", "too",      "quite",
                                                        "pretty", "extremely", "super", "not"};

}  // namespace

std::string heuristic_tag(const std::string& word) {
  if (word.empty()) return "X";
  if (word.size() == 1 && std::ispunct(static_cast<unsigned char>(word[0]))) return "PUNCT";
  if (std::all_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c) || c == '.'; })) return "NUM";
  if (word[0] == '<') return "SPECIAL";
  auto it = closed_class().find(word);
  if (it != closed_class().end()) return it->second;
  if (ends_with(word, "ly")) return "ADV";
  if (ends_with(word, "ing") || ends_with(word, "ed")) return "VERB";
  for (const char* s : {"ful", "ous", "ive", "able", "ible", "al", "ic", "less", "est"})
    if (ends_with(word, s)) return "ADJ";
  return "NOUN";
}

PosTagger PosTagger::fit(const text::Vocabulary& vocab, std::span<const TokenSequence> sentences) {
  std::vector<int> adj_votes(vocab.size(), 0), noun_votes(vocab.size(), 0);
  for (const auto& s : sentences)
    for (std::size_t k = 1; k < s.size(); ++k) {
      const std::string& prev = vocab.token(s[k - 1]);
      if (kAdjectiveCues.count(prev)) ++adj_votes[static_cast<std::size_t>(s[k])];
      auto it = closed_class().find(prev);
      if (it != closed_class().end() && it->second == "DET") ++noun_votes[static_cast<std::size_t>(s[k])];
    }
  PosTagger t;
  t.tags_.resize(vocab.size());
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (text::is_special(static_cast<int>(id))) {
      t.tags_[id] = "SPECIAL";
      continue;
    }
    std::string tag = heuristic_tag(vocab.token(static_cast<int>(id)));
    if (tag == "NOUN" && adj_votes[id] > noun_votes[id]) tag = "ADJ";
    t.tags_[id] = tag;
  }
  return t;
}

const std::string& PosTagger::tag(int token) const { return tags_.at(static_cast<std::size_t>(token)); }

// ---------------------------------------------------------------------------
// TextBugger

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::pair<std::string, std::string>> character_bugs(const std::string& word) {
  std::vector<std::pair<std::string, std::string>> out;
  if (word.size() < 2 || !std::any_of(word.begin(), word.end(), [](unsigned char c) { return std::isalpha(c); }))
    return out;
  const std::size_t m = word.size() / 2;
  auto add = [&](const char* kind, std::string w) {
    if (w != word) out.emplace_back(kind, std::move(w));
  };
  add("insert", word.substr(0, m) + word[m] + word.substr(m));
  if (word.size() >= 3) add("delete", word.substr(0, m) + word.substr(m + 1));
  if (word.size() >= 4) {
    std::string s = word;
    std::swap(s[m - 1], s[m]);
    add("swap", s);
  }
  static const std::vector<std::pair<char, char>> homoglyphs = {
      {'o', '0'}, {'l', '1'}, {'a', '@'}, {'e', '3'}, {'i', '1'}};
  for (std::size_t k = 0; k < word.size(); ++k) {
    auto it = std::find_if(homoglyphs.begin(), homoglyphs.end(), [&](const auto& h) { return h.first == word[k]; });
    if (it != homoglyphs.end()) {
      std::string s = word;
      s[k] = it->second;
      add("visual", s);
      break;
    }
  }
  add("split", word.substr(0, m) + " " + word.substr(m));
  return out;
}

double mean_shift(const rbrs::BlackBoxRecommender& blackbox, const arg::ItemContext& item,
                  std::span<const rbrs::UserQuery> users, const TokenSequence& attack) {
  if (attack.empty() || users.empty()) return 0.0;
  const auto shifts = blackbox.prediction_shifts(users, item.item_id, *item.reviews, attack);
  double total = 0.0;
  for (const auto& s : shifts) total += s.attacked - s.base;
  return total / static_cast<double>(shifts.size());
}

namespace {

std::vector<std::string> expand(const std::vector<std::string>& words) {
  // A split bug produces "ab cd"; the recommender sees two words.
  std::vector<std::string> out;
  for (const auto& w : words) {
    const auto space = w.find(' ');
    if (space == std::string::npos) {
      out.push_back(w);
    } else {
      out.push_back(w.substr(0, space));
      out.push_back(w.substr(space + 1));
    }
  }
  return out;
}

TokenSequence tokens_of(const text::Vocabulary& vocab, const std::vector<std::string>& words) {
  const auto flat = expand(words);
  return text::tokenize_words(vocab, flat);
}

}  // namespace

std::vector<double> deletion_importance(const rbrs::BlackBoxRecommender& blackbox, const arg::ItemContext& item,
                                        std::span<const rbrs::UserQuery> users, const text::Vocabulary& vocab,
                                        const std::vector<std::string>& words) {
  const double base = mean_shift(blackbox, item, users, tokens_of(vocab, words));
  std::vector<double> out(words.size());
  for (std::size_t j = 0; j < words.size(); ++j) {
    std::vector<std::string> without = words;
    without.erase(without.begin() + static_cast<std::ptrdiff_t>(j));
    out[j] = mean_shift(blackbox, item, users, tokens_of(vocab, without)) - base;
  }
  return out;
}

AttackResult textbugger(const rbrs::BlackBoxRecommender& blackbox, const arg::ItemContext& item,
                        std::span<const rbrs::UserQuery> users, const AttackResult& seed_review,
                        const text::Vocabulary& vocab, const TextBuggerOptions& options) {
  const std::uint64_t start = blackbox.prediction_count();
  AttackResult r;
  r.item_id = item.item_id;
  r.source = "textbugger";
  r.words = seed_review.words;
  r.attack_review = tokens_of(vocab, r.words);
  auto spent = [&] { return blackbox.prediction_count() - start; };
  const std::uint64_t per_eval = 2 * users.size();
  auto affordable = [&](std::uint64_t evals) { return spent() + evals * per_eval <= options.query_budget; };

  if (options.budget == 0 || r.words.empty() || !affordable(r.words.size() + 1)) {
    r.queries_used = spent();
    return r;
  }
  const auto importance = deletion_importance(blackbox, item, users, vocab, r.words);
  double current = mean_shift(blackbox, item, users, r.attack_review);
  std::vector<std::size_t> order(r.words.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });

  bool exhausted = false;
  for (std::size_t j : order) {
    if (r.edits.size() >= options.budget || exhausted) break;
    const std::string original = r.words[j];
    std::string best_word;
    std::string best_kind;
    double best = current;
    for (const auto& [kind, bugged] : character_bugs(original)) {
      if (!affordable(1)) {
        exhausted = true;
        break;
      }
      std::vector<std::string> trial = r.words;
      trial[j] = bugged;
      const double ps = mean_shift(blackbox, item, users, tokens_of(vocab, trial));
      if (ps > best) {
        best = ps;
        best_word = bugged;
        best_kind = kind;
      }
    }
    if (!best_word.empty()) {
      r.words[j] = best_word;
      current = best;
      r.edits.push_back({j, best_kind, original, best_word});
    }
  }
  r.words = expand(r.words);
  r.attack_review = text::tokenize_words(vocab, r.words);
  r.ps = current;
  r.queries_used = spent();
  return r;
}

// ---------------------------------------------------------------------------
// HotFlip

std::vector<int> hotflip_candidates(const ad::Matrix& embeddings, const PosTagger& tagger, int token,
                                    const HotFlipOptions& options) {
  std::vector<std::pair<double, int>> scored;
  const Eigen::RowVectorXd e = embeddings.row(token);
  const double en = e.norm();
  if (en < 1e-12) return {};
  const std::string& cls = tagger.tag(token);
  for (Eigen::Index c = text::kNumSpecial; c < embeddings.rows(); ++c) {
    if (c == token || tagger.tag(static_cast<int>(c)) != cls) continue;
    const double cn = embeddings.row(c).norm();
    if (cn < 1e-12) continue;
    const double cos = embeddings.row(c).dot(e) / (cn * en);
    if (cos >= options.min_cosine) scored.emplace_back(cos, static_cast<int>(c));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int> out;
  for (std::size_t k = 0; k < std::min(options.candidate_pool, scored.size()); ++k) out.push_back(scored[k].second);
  return out;
}

AttackResult hotflip(std::shared_ptr<const rbrs::RbrsModel> model, const arg::ItemContext& item,
                     std::span<const rbrs::UserQuery> users, const AttackResult& seed_review,
                     const text::Vocabulary& vocab, const PosTagger& tagger, const HotFlipOptions& options) {
  rbrs::BlackBoxRecommender oracle(model);
  AttackResult r;
  r.item_id = item.item_id;
  r.source = "hotflip";
  r.attack_review = seed_review.attack_review;
  double current = mean_shift(oracle, item, users, r.attack_review);
  const ad::Matrix& emb = model->word_embeddings();

  for (std::size_t flip = 0; flip < options.max_flips && !r.attack_review.empty(); ++flip) {
    const rbrs::ItemQuery query{item.item_id, item.reviews, "", &r.attack_review};
    const ad::Matrix grad = model->attack_embedding_gradient(users, query);
    struct Candidate {
      double score;
      std::size_t position;
      int token;
    };
    std::vector<Candidate> pool;
    for (std::size_t p = 0; p < r.attack_review.size(); ++p) {
      const int tok = r.attack_review[p];
      if (text::is_special(tok)) continue;
      for (int c : hotflip_candidates(emb, tagger, tok, options)) {
        const double score = (emb.row(c) - emb.row(tok)).dot(grad.row(static_cast<Eigen::Index>(p)));
        pool.push_back({score, p, c});
      }
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (pool.size() > options.exact_checks) pool.resize(options.exact_checks);
    double best = current;
    const Candidate* chosen = nullptr;
    for (const auto& cand : pool) {
      TokenSequence trial = r.attack_review;
      trial.ids()[cand.position] = cand.token;
      const double ps = mean_shift(oracle, item, users, trial);
      if (ps > best) {
        best = ps;
        chosen = &cand;
      }
    }
    if (!chosen) break;
    r.edits.push_back({chosen->position, "replace", vocab.token(r.attack_review[chosen->position]),
                       vocab.token(chosen->token)});
    r.attack_review.ids()[chosen->position] = chosen->token;
    current = best;
  }
  r.words = text::to_words(vocab, r.attack_review);
  r.ps = current;
  r.queries_used = oracle.prediction_count();
  return r;
}

}  // namespace revshill::baselines
