#include "revshill/textproc.hpp"

#include "revshill/errors.hpp"
#include "revshill/hashing.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <map>

namespace revshill::text {

namespace {

const std::vector<std::string> kSpecialTokens = {"<pad>", "<bos>", "<eos>", "<unk>"};

bool closing_punct(const std::string& w) {
  return w.size() == 1 && std::string_view(".,!?;:)%").find(w[0]) != std::string_view::npos;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& t : kSpecialTokens) add(t);
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end() || it->second < kNumSpecial) return kUnk;
  return it->second;
}

const std::string& Vocabulary::token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

bool Vocabulary::contains(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it != index_.end() && it->second >= kNumSpecial;
}

nlohmann::json Vocabulary::to_json() const {
  return {{"version", kFormatVersion}, {"specials", {{"pad", kPad}, {"bos", kBos}, {"eos", kEos}, {"unk", kUnk}}},
          {"tokens", tokens_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != kFormatVersion) throw DataError("unsupported vocabulary version");
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < kSpecialTokens.size() ||
      !std::equal(kSpecialTokens.begin(), kSpecialTokens.end(), tokens.begin()))
    throw DataError("vocabulary does not start with the special tokens");
  Vocabulary v;
  for (std::size_t i = kSpecialTokens.size(); i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != static_cast<int>(i)) throw DataError("vocabulary has duplicate token " + tokens[i]);
  }
  return v;
}

std::string Vocabulary::hash() const { return sha256_hex(to_json().dump()); }

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocabulary build_vocab(std::span<const std::string> texts, std::size_t min_freq, std::size_t max_size) {
  if (texts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts)
    for (auto& w : split_words(t)) ++freq[w];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, n] : freq)
    if (n >= min_freq && !std::count(kSpecialTokens.begin(), kSpecialTokens.end(), w)) ranked.emplace_back(w, n);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  Vocabulary v;
  for (const auto& [w, n] : ranked) v.add(w);
  return v;
}

Vocabulary build_vocab(const corpus::Corpus& corpus, std::span<const std::size_t> review_indices,
                       std::size_t min_freq, std::size_t max_size) {
  std::vector<std::string> texts;
  texts.reserve(review_indices.size());
  for (std::size_t i : review_indices) texts.push_back(corpus.review(i).text);
  return build_vocab(texts, min_freq, max_size);
}

TokenSequence tokenize_words(const Vocabulary& vocab, std::span<const std::string> words, std::size_t max_length) {
  std::vector<int> ids;
  ids.reserve(std::min(words.size(), max_length));
  for (const auto& w : words) {
    if (ids.size() >= max_length) break;
    ids.push_back(vocab.id(w));
  }
  return TokenSequence(std::move(ids));
}

TokenSequence tokenize(const Vocabulary& vocab, std::string_view text, std::size_t max_length) {
  const auto words = split_words(text);
  return tokenize_words(vocab, words, max_length);
}

std::vector<std::string> to_words(const Vocabulary& vocab, const TokenSequence& seq) {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (int id : seq) out.push_back(vocab.token(id));
  return out;
}

std::string detokenize(const Vocabulary& vocab, const TokenSequence& seq) {
  std::string out;
  for (int id : seq) {
    const std::string& w = vocab.token(id);
    if (!out.empty() && !closing_punct(w)) out.push_back(' ');
    out += w;
  }
  return out;
}

corpus::Corpus tokenize_corpus(const corpus::Corpus& corpus, const Vocabulary& vocab) {
  std::vector<std::vector<int>> tokens;
  tokens.reserve(corpus.size());
  for (const auto& r : corpus.reviews()) tokens.push_back(tokenize(vocab, r.text).ids());
  return corpus.with_tokens(std::move(tokens));
}

RougeScore rouge1(const TokenSequence& candidate, const TokenSequence& reference) {
  if (candidate.empty() || reference.empty()) {
    spdlog::warn("rouge1 called with an empty sequence; scoring 0");
    return {};
  }
  std::unordered_map<int, int> ref_counts;
  for (int id : reference)
    if (id != kUnk) ++ref_counts[id];
  std::unordered_map<int, int> cand_counts;
  for (int id : candidate)
    if (id != kUnk) ++cand_counts[id];
  double overlap = 0.0;
  for (const auto& [id, n] : cand_counts) {
    auto it = ref_counts.find(id);
    if (it != ref_counts.end()) overlap += std::min(n, it->second);
  }
  RougeScore s;
  s.precision = overlap / static_cast<double>(candidate.size());
  s.recall = overlap / static_cast<double>(reference.size());
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double mean_rouge1_f1(const TokenSequence& candidate, std::span<const TokenSequence> references) {
  if (references.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ref : references) total += rouge1(candidate, ref).f1;
  return total / static_cast<double>(references.size());
}

double aspect_word_percentage(const TokenSequence& review, const std::unordered_set<int>& aspect_words) {
  if (aspect_words.empty()) throw std::invalid_argument("aspect word set is empty");
  if (review.empty()) return 0.0;
  const auto hits = std::count_if(review.begin(), review.end(), [&](int id) { return aspect_words.count(id) > 0; });
  return static_cast<double>(hits) / static_cast<double>(review.size());
}

}  // namespace revshill::text
