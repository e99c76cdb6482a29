#include "revshill/autodiff.hpp"
#include "revshill/checkpoint.hpp"
#include "revshill/random.hpp"

#include <doctest.h>

#include <filesystem>

using namespace revshill;
namespace fs = std::filesystem;

TEST_CASE("parameter snapshots and digests") {
  ad::ParameterStore s;
  s.add("w", ad::Matrix::Constant(2, 3, 0.5));
  s.add("b", ad::Matrix::Zero(1, 3));
  const auto d0 = s.digest();
  const auto snap = s.snapshot();
  s.get("w").value(1, 2) = 7.0;
  CHECK(s.digest() != d0);
  s.restore(snap);
  CHECK(s.digest() == d0);
  CHECK(s.scalar_count() == 9);
  s.get("b").frozen = true;
  CHECK(s.trainable().size() == 1);
}

TEST_CASE("checkpoint needs both files") {
  const fs::path dir = fs::temp_directory_path() / "revshill_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string stem = (dir / "m").string();
  ad::ParameterStore s;
  s.add("w", ad::Matrix::Constant(2, 2, 1.25));
  ckpt::Sidecar side;
  side.kind = "test";
  side.vocab_hash = "abc";
  ckpt::save(stem, s, side);
  CHECK(ckpt::exists(stem));

  ad::ParameterStore t;
  t.add("w", ad::Matrix::Zero(2, 2));
  ckpt::load_parameters(t, stem + ".bin");
  CHECK(t.digest() == s.digest());
  CHECK(ckpt::read_sidecar(stem).kind == "test");

  fs::remove(stem + ".json");
  CHECK_FALSE(ckpt::exists(stem));
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  auto r1 = make_rng(5, "x"), r2 = make_rng(5, "x");
  for (int k = 0; k < 10; ++k) CHECK(r1() == r2());
}
