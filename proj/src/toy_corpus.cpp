#include "revshill/toy_corpus.hpp"
#include "revshill/errors.hpp"
#include "revshill/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace revshill::toy {

namespace {

using Bank = std::vector<std::string>;

// Index 0 is the most negative level, 4 the most positive.
const std::array<Bank, 5> kAdjectives = {{
    {"awful", "terrible", "horrible", "useless"},
    {"poor", "weak", "flimsy", "disappointing"},
    {"okay", "decent", "average", "fine"},
    {"good", "solid", "nice", "reliable"},
    {"excellent", "amazing", "perfect", "fantastic"},
}};
const std::array<Bank, 5> kVerbs = {{
    {"hate", "regret"},
    {"dislike", "doubt"},
    {"tolerate", "accept"},
    {"like", "enjoy"},
    {"love", "adore"},
}};
const std::array<Bank, 2> kNouns = {{
    {"blender", "blade", "motor", "lid", "jar", "button"},
    {"headphones", "sound", "bass", "battery", "cable", "cushion"},
}};
const Bank kWhen = {"week", "month", "year"};
const Bank kUse = {"day", "morning", "evening", "weekend"};

const std::string& pick(const Bank& bank, Rng& rng) { return bank[uniform_index(rng, bank.size())]; }

double gaussian(Rng& rng) {
  const double u1 = std::max(uniform01(rng), 1e-12);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

int sentence_level(int rating, Rng& rng) {
  const double u = uniform01(rng);
  int level = rating - 1;
  if (u < 0.2) level -= 1;
  else if (u < 0.4) level += 1;
  return std::clamp(level, 0, 4);
}

std::string sentence(int topic, int level, Rng& rng) {
  const auto& nouns = kNouns[static_cast<std::size_t>(topic)];
  const auto& adj = kAdjectives[static_cast<std::size_t>(level)];
  const auto& verbs = kVerbs[static_cast<std::size_t>(level)];
  switch (uniform_index(rng, 5)) {
    case 0:
      return "the " + pick(nouns, rng) + " is " + pick(adj, rng) + " .";
    case 1:
      return "i " + pick(verbs, rng) + " the " + pick(nouns, rng) + " .";
    case 2:
      return pick(adj, rng) + " " + pick(nouns, rng) + " , " + pick(adj, rng) + " " + pick(nouns, rng) + " .";
    case 3:
      return "overall it is " + pick(adj, rng) + " .";
    default:
      return "the " + pick(nouns, rng) + " feels " + pick(adj, rng) + " and the " + pick(nouns, rng) + " is " +
             pick(adj, rng) + " .";
  }
}

std::string filler(Rng& rng) {
  switch (uniform_index(rng, 3)) {
    case 0:
      return "i bought it last " + pick(kWhen, rng) + " .";
    case 1:
      return std::string("it arrived in a ") + (uniform01(rng) < 0.5 ? "small" : "large") + " box .";
    default:
      return "i use it every " + pick(kUse, rng) + " .";
  }
}

std::string review_text(int topic, int rating, Rng& rng) {
  std::string text;
  auto append = [&](const std::string& s) {
    if (!text.empty()) text += ' ';
    text += s;
  };
  if (uniform01(rng) < 0.35) append(filler(rng));
  const std::size_t n = 2 + uniform_index(rng, 3);
  for (std::size_t k = 0; k < n; ++k) append(sentence(topic, sentence_level(rating, rng), rng));
  if (rating >= 4 && uniform01(rng) < 0.5) append("i would recommend it .");
  if (rating <= 2 && uniform01(rng) < 0.5) append("i would not recommend it .");
  return text;
}

std::string padded(const std::string& prefix, std::size_t k) {
  std::string digits = std::to_string(k);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return prefix + digits;
}

// Each user reviews `per_user` distinct items; the posting order is shuffled.
std::vector<std::pair<std::size_t, std::size_t>> draw_pairs(std::size_t users, std::size_t items, std::size_t per_user,
                                                            Rng& rng) {
  if (per_user > items) throw std::invalid_argument("reviews_per_user exceeds the number of items");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> all(items);
  for (std::size_t i = 0; i < items; ++i) all[i] = i;
  for (std::size_t u = 0; u < users; ++u) {
    shuffle(all.begin(), all.end(), rng);
    for (std::size_t k = 0; k < per_user; ++k) pairs.emplace_back(u, all[k]);
  }
  shuffle(pairs.begin(), pairs.end(), rng);
  return pairs;
}

}  // namespace

std::vector<corpus::Review> make_toy_reviews(const ToyOptions& options) {
  Rng rng = make_rng(options.seed, "toy-corpus");
  std::vector<double> quality(options.items);
  for (auto& q : quality) q = 1.2 + 3.6 * uniform01(rng);
  std::vector<double> bias(options.users);
  for (auto& b : bias) b = 0.4 * gaussian(rng);

  const auto pairs = draw_pairs(options.users, options.items, options.reviews_per_user, rng);
  std::vector<corpus::Review> out;
  out.reserve(pairs.size());
  for (const auto& [u, i] : pairs) {
    const double raw = quality[i] + bias[u] + 0.5 * gaussian(rng);
    const int rating = std::clamp(static_cast<int>(std::lround(raw)), 1, 5);
    corpus::Review r;
    r.review_id = padded("r", out.size());
    r.user_id = padded("u", u);
    r.item_id = padded("i", i);
    r.rating = rating;
    r.text = review_text(static_cast<int>(i % 2), rating, rng);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<corpus::Review> make_separable_reviews(std::size_t users, std::size_t items, std::size_t reviews_per_user,
                                                   std::uint64_t seed) {
  Rng rng = make_rng(seed, "separable-corpus");
  const auto pairs = draw_pairs(users, items, reviews_per_user, rng);
  std::vector<corpus::Review> out;
  for (const auto& [u, i] : pairs) {
    const bool good = i % 2 == 0;
    corpus::Review r;
    r.review_id = padded("r", out.size());
    r.user_id = padded("u", u);
    r.item_id = padded("i", i);
    r.rating = good ? 5 : 1;
    r.text = good ? "good good item" : "bad bad item";
    out.push_back(std::move(r));
  }
  return out;
}

void write_jsonl(const std::vector<corpus::Review>& reviews, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& r : reviews) {
    nlohmann::json j = {{"reviewerID", r.user_id}, {"asin", r.item_id}, {"overall", r.rating}, {"reviewText", r.text}};
    out << j.dump() << '\n';
  }
}

}  // namespace revshill::toy
