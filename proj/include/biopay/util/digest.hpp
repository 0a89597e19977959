#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace biopay::util {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

// Incremental SHA-256 for digests over several fields.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view data);
  std::string hex_digest();

 private:
  struct Impl;
  Impl* impl_;
};

// Whitespace is skipped; nullopt on any other invalid input.
std::optional<std::string> base64_decode(std::string_view text);
std::string base64_encode(std::string_view data);

}  // namespace biopay::util
