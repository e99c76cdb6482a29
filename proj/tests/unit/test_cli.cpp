#include "revshill/toy_corpus.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "revshill_cli_test.log";
  const std::string cmd = std::string(REVSHILL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream os;
  os << in.rdbuf();
  r.output = os.str();
  return r;
}

// Tiny corpus and config so every stage runs in seconds.
std::string tiny_setup(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  revshill::toy::ToyOptions opt;
  opt.users = 30;
  opt.items = 8;
  opt.reviews_per_user = 4;
  revshill::toy::write_jsonl(revshill::toy::make_toy_reviews(opt), (dir / "reviews.jsonl").string());
  const nlohmann::json cfg = {
      {"out", (dir / "out").string()},
      {"data", {{"path", (dir / "reviews.jsonl").string()}, {"vocab_min_freq", 1}}},
      {"rbrs", {{"embed_dim", 8}, {"filters", 8}, {"latent_dim", 4}, {"epochs", 1}}},
      {"lm", {{"dim", 8}, {"layers", 1}, {"ff_dim", 16}, {"epochs", 1}}},
      {"abae", {{"aspects", 3}, {"embed_dim", 8}, {"epochs", 1}}},
      {"generator", {{"dim", 8}, {"ff_dim", 16}, {"decoder_layers", 1}, {"epochs", 1}, {"max_decode_length", 10}}}};
  std::ofstream(dir / "config.json") << cfg.dump();
  return "--config " + (dir / "config.json").string();
}

}  // namespace

TEST_CASE("argument and config errors exit with code 2") {
  CHECK(cli("ingest --no-such-flag").code == 2);
  CHECK(cli("ingest --rewards-mask XYZ").code == 2);
  CHECK(cli("ingest --set rbrs.bogus=1").code == 2);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("missing prerequisites are named and exit with code 3") {
  const fs::path dir = fs::temp_directory_path() / "revshill_cli_prereq";
  const std::string cfg = tiny_setup(dir);

  auto before_ingest = cli("train-rbrs " + cfg);
  CHECK(before_ingest.code == 3);
  CHECK(before_ingest.output.find("dataset") != std::string::npos);

  for (const char* stage : {"ingest", "train-rbrs", "train-abae", "pretrain-arg"}) {
    const auto r = cli(std::string(stage) + " " + cfg);
    INFO(stage << ": " << r.output);
    REQUIRE(r.code == 0);
  }
  const auto no_lm = cli("train-arg " + cfg);
  CHECK(no_lm.code == 3);
  CHECK(no_lm.output.find("langmodel checkpoint") != std::string::npos);

  const auto no_arg = cli("attack --attacker arg " + cfg);
  CHECK(no_arg.code == 3);

  // an artifact edited after its manifest was written is not trusted
  std::ofstream(dir / "out" / "vocab.json", std::ios::app) << " ";
  const auto tampered = cli("train-abae " + cfg);
  CHECK(tampered.code == 3);
  CHECK(tampered.output.find("vocabulary") != std::string::npos);
}
