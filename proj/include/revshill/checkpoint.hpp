#pragma once

// Versioned checkpoint format shared by every trained model: a binary blob of
// named parameter matrices (<stem>.bin) plus a JSON sidecar (<stem>.json)
// carrying hyperparameters, vocabulary hash, seed and metric history.

#include "revshill/autodiff.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace revshill::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Sidecar {
  std::string kind;
  nlohmann::json hyper = nlohmann::json::object();
  std::string vocab_hash;
  std::uint64_t seed = 0;
  nlohmann::json history = nlohmann::json::array();
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Sidecar from_json(const nlohmann::json& j);
};

void save_parameters(const ad::ParameterStore& store, const std::string& path);
// Names and shapes must match the parameters already present in `store`.
void load_parameters(ad::ParameterStore& store, const std::string& path);

void save(const std::string& stem, const ad::ParameterStore& store, const Sidecar& sidecar);
Sidecar read_sidecar(const std::string& stem);
bool exists(const std::string& stem);

// Throws MissingPrerequisite when the checkpoint was trained on another vocabulary.
void require_vocab(const Sidecar& sidecar, const std::string& vocab_hash, const std::string& what);

}  // namespace revshill::ckpt
