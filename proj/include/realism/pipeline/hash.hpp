#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace realism::pipeline {

/// Incremental SHA-256. Fields are length-prefixed so concatenations cannot collide.
class Hasher {
 public:
  Hasher();
  ~Hasher();
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;

  Hasher& field(std::string_view bytes);
  Hasher& file(const std::filesystem::path& path);
  /// Lowercase hex digest; the hasher cannot be updated afterwards.
  std::string hex();

 private:
  void raw(const void* data, std::size_t n);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Plain SHA-256 of the bytes, without the field framing.
std::string sha256_hex(std::string_view bytes);

}  // namespace realism::pipeline
