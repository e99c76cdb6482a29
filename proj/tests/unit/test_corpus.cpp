#include "revshill/corpus.hpp"
#include "revshill/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace revshill::corpus;
namespace fs = std::filesystem;

namespace {

fs::path write_lines(const std::string& name, const std::vector<std::string>& lines) {
  const fs::path p = fs::temp_directory_path() / ("revshill_" + name + ".jsonl");
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
  return p;
}

Corpus grouped(const std::vector<int>& sizes) {
  std::vector<Review> rs;
  int n = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i)
    for (int k = 0; k < sizes[i]; ++k, ++n)
      rs.push_back({"r" + std::to_string(n), "u" + std::to_string(n), "i" + std::to_string(i), 3, "x", {}});
  return Corpus(rs);
}

}  // namespace

TEST_CASE("ingest maps amazon fields") {
  const auto p = write_lines("one", {R"({"reviewerID":"A1","asin":"B1","overall":5,"reviewText":"great"})"});
  const auto r = ingest_jsonl(p.string(), SchemaMap::amazon());
  REQUIRE(r.corpus.size() == 1);
  CHECK(r.corpus.review(0).user_id == "A1");
  CHECK(r.corpus.review(0).item_id == "B1");
  CHECK(r.corpus.review(0).rating == 5);
}

TEST_CASE("ingest drops out-of-range ratings") {
  const auto p = write_lines("zero", {R"({"reviewerID":"A1","asin":"B1","overall":0,"reviewText":"meh"})",
                                      R"({"reviewerID":"A2","asin":"B1","overall":4,"reviewText":"ok"})"});
  const auto r = ingest_jsonl(p.string(), SchemaMap::amazon());
  CHECK(r.corpus.size() == 1);
  CHECK(r.stats.dropped_rating == 1);
}

TEST_CASE("ten-line fixture indexes users and items") {
  std::vector<std::string> lines;
  // users A,B,C; items X,Y; counted by hand: X has 6 reviews, Y has 4
  const char* pairs[10][2] = {{"A", "X"}, {"B", "X"}, {"C", "X"}, {"A", "Y"}, {"B", "Y"},
                              {"C", "Y"}, {"A", "X"}, {"B", "X"}, {"C", "X"}, {"A", "Y"}};
  for (int k = 0; k < 10; ++k)
    lines.push_back(std::string(R"({"reviewerID":")") + pairs[k][0] + R"(","asin":")" + pairs[k][1] +
                    R"(","overall":3,"reviewText":"t)" + std::to_string(k) + R"(","unixReviewTime":)" +
                    std::to_string(k) + "}");
  const auto r = ingest_jsonl(write_lines("ten", lines).string(), SchemaMap::amazon());
  CHECK(r.corpus.n_users() == 3);
  CHECK(r.corpus.n_items() == 2);
  CHECK(r.corpus.by_item("X").size() + r.corpus.by_item("Y").size() == r.corpus.size());
}

TEST_CASE("split sizes and determinism") {
  const Corpus c = grouped({100});
  const auto s = split_corpus(c, {0.8, 0.1, 0.1}, 7);
  CHECK(s.train.size() == 80);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 10);
  const auto again = split_corpus(c, {0.8, 0.1, 0.1}, 7);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
}

TEST_CASE("largest-remainder apportionment") {
  // oracle: floors 8/1/1 already sum to 10
  CHECK(apportion(10, {0.8, 0.1, 0.1}) == std::array<std::size_t, 3>{8, 1, 1});
  // 7 * (0.5, 0.3, 0.2) = 3.5, 2.1, 1.4 -> floors 3,2,1, one left goes to largest remainder (0.5)
  CHECK(apportion(7, {0.5, 0.3, 0.2}) == std::array<std::size_t, 3>{4, 2, 1});
}

TEST_CASE("leave-one-out examples") {
  const Corpus five = grouped({5});
  const std::vector<std::string> i0{"i0"};
  const auto ex = build_loo_examples(five, i0, 2);
  CHECK(ex.size() == 5);
  for (const auto& e : ex) CHECK(e.context_reviews.size() == 4);

  const Corpus one = grouped({1});
  CHECK(build_loo_examples(one, i0, 2).empty());

  const Corpus three = grouped({4, 4, 2});
  const std::vector<std::string> all{"i0", "i1", "i2"};
  CHECK(build_loo_examples(three, all, 2).size() == 10);
}
