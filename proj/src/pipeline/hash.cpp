#include "realism/pipeline/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <fstream>

#include "realism/error.hpp"

namespace realism::pipeline {

struct Hasher::Impl {
  EVP_MD_CTX* ctx = nullptr;
  bool done = false;
};

Hasher::Hasher() : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_MD_CTX_new();
  if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1)
    throw IoError("cannot initialise SHA-256");
}

Hasher::~Hasher() { EVP_MD_CTX_free(impl_->ctx); }

void Hasher::raw(const void* data, std::size_t n) {
  if (impl_->done) throw InvalidArgument("hasher already finalised");
  EVP_DigestUpdate(impl_->ctx, data, n);
}

Hasher& Hasher::field(std::string_view bytes) {
  const std::uint64_t n = bytes.size();
  raw(&n, sizeof n);
  raw(bytes.data(), bytes.size());
  return *this;
}

Hasher& Hasher::file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return field(bytes);
}

namespace {

std::string to_hex(const unsigned char* md, unsigned len) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += digits[md[i] >> 4];
    out += digits[md[i] & 15];
  }
  return out;
}

}  // namespace

std::string Hasher::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(impl_->ctx, md.data(), &len);
  impl_->done = true;
  return to_hex(md.data(), len);
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 failed");
  return to_hex(md.data(), len);
}

}  // namespace realism::pipeline
