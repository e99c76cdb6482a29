// Writes the synthetic two-topic toy corpus as Amazon-style JSON lines.

#include "revshill/toy_corpus.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Generate the toy review corpus"};
  revshill::toy::ToyOptions opt;
  std::string out = "data/toy/reviews.jsonl";
  app.add_option("--out", out, "Output path");
  app.add_option("--users", opt.users);
  app.add_option("--items", opt.items);
  app.add_option("--reviews-per-user", opt.reviews_per_user);
  app.add_option("--seed", opt.seed);
  CLI11_PARSE(app, argc, argv);
  const auto reviews = revshill::toy::make_toy_reviews(opt);
  revshill::toy::write_jsonl(reviews, out);
  std::cout << "wrote " << reviews.size() << " reviews to " << out << '\n';
  return 0;
}
