#include "revshill/checkpoint.hpp"

#include "revshill/errors.hpp"

#include <filesystem>
#include <fstream>

namespace revshill::ckpt {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'S', 'H'};

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint");
  return v;
}

}  // namespace

nlohmann::json Sidecar::to_json() const {
  return {{"format_version", kFormatVersion}, {"kind", kind},   {"hyper", hyper}, {"vocab_hash", vocab_hash},
          {"seed", seed},                     {"history", history}, {"extra", extra}};
}

Sidecar Sidecar::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0u) != kFormatVersion) throw DataError("unsupported checkpoint sidecar version");
  Sidecar s;
  s.kind = j.at("kind").get<std::string>();
  s.hyper = j.value("hyper", nlohmann::json::object());
  s.vocab_hash = j.value("vocab_hash", std::string());
  s.seed = j.value("seed", std::uint64_t{0});
  s.history = j.value("history", nlohmann::json::array());
  s.extra = j.value("extra", nlohmann::json::object());
  return s;
}

void save_parameters(const ad::ParameterStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(kMagic, 4);
  write_pod(out, kFormatVersion);
  write_pod(out, static_cast<std::uint64_t>(store.all().size()));
  for (const auto& p : store.all()) {
    write_pod(out, static_cast<std::uint64_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_pod(out, static_cast<std::int64_t>(p->value.rows()));
    write_pod(out, static_cast<std::int64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * static_cast<Eigen::Index>(sizeof(double))));
  }
}

void load_parameters(ad::ParameterStore& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingPrerequisite("checkpoint not found: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw DataError("not a checkpoint file: " + path);
  if (read_pod<std::uint32_t>(in) != kFormatVersion) throw DataError("unsupported checkpoint version: " + path);
  const auto count = read_pod<std::uint64_t>(in);
  if (count != store.all().size()) throw DataError("checkpoint parameter count mismatch: " + path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint64_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = read_pod<std::int64_t>(in);
    const auto cols = read_pod<std::int64_t>(in);
    ad::Parameter& p = store.get(name);
    if (p.value.rows() != rows || p.value.cols() != cols) throw DataError("shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(rows * cols * 8));
    if (!in) throw DataError("truncated checkpoint: " + path);
  }
}

void save(const std::string& stem, const ad::ParameterStore& store, const Sidecar& sidecar) {
  save_parameters(store, stem + ".bin");
  std::ofstream out(stem + ".json");
  if (!out) throw DataError("cannot write checkpoint sidecar " + stem + ".json");
  out << sidecar.to_json().dump(2) << '\n';
}

Sidecar read_sidecar(const std::string& stem) {
  std::ifstream in(stem + ".json");
  if (!in) throw MissingPrerequisite("checkpoint sidecar not found: " + stem + ".json");
  return Sidecar::from_json(nlohmann::json::parse(in));
}

bool exists(const std::string& stem) {
  return std::filesystem::exists(stem + ".bin") && std::filesystem::exists(stem + ".json");
}

void require_vocab(const Sidecar& sidecar, const std::string& vocab_hash, const std::string& what) {
  if (sidecar.vocab_hash != vocab_hash)
    throw MissingPrerequisite(what + " was trained with a different vocabulary (hash mismatch)");
}

}  // namespace revshill::ckpt
