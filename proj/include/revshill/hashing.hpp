#pragma once

#include <string>
#include <string_view>

namespace revshill {

// Incremental SHA-256 (OpenSSL backed); hex() may be called repeatedly.
class Sha256 {
 public:
  void update(std::string_view bytes) { buffer_.append(bytes); }
  std::string hex() const;

 private:
  std::string buffer_;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

}  // namespace revshill
