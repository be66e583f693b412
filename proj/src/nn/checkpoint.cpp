#include "realism/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "realism/error.hpp"

namespace realism::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'L', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError("truncated checkpoint " + path.string());
  return v;
}

bool wide_scalar(const std::string& header) {
  auto j = nlohmann::json::parse(header);
  const std::string s = j.value("scalar", "float32");
  if (s != "float32" && s != "float64") throw ParseError("checkpoint scalar must be float32 or float64");
  return s == "float64";
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file) {
  const bool wide = wide_scalar(file.header_json);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, CheckpointFile::kFormatVersion);
  put<std::uint64_t>(os, file.header_json.size());
  os.write(file.header_json.data(), static_cast<std::streamsize>(file.header_json.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(file.blocks.size()));
  for (const auto& [name, t] : file.blocks) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, 4);
    for (Index d : {t.shape.n, t.shape.c, t.shape.h, t.shape.w}) put<std::int64_t>(os, d);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(t.size()));
    if (wide) {
      os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    } else {
      Eigen::VectorXf f = t.data.cast<float>();
      os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(float)));
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ParseError(path.string() + " is not a checkpoint");
  const auto version = get<std::uint32_t>(is, path);
  if (version != CheckpointFile::kFormatVersion)
    throw ParseError("unsupported checkpoint format_version " + std::to_string(version));
  CheckpointFile file;
  const auto header_len = get<std::uint64_t>(is, path);
  if (header_len > (1u << 26)) throw ParseError("checkpoint header too large");
  file.header_json.resize(header_len);
  if (!is.read(file.header_json.data(), static_cast<std::streamsize>(header_len)))
    throw ParseError("truncated checkpoint header");
  const bool wide = wide_scalar(file.header_json);
  const auto n_blocks = get<std::uint32_t>(is, path);
  for (std::uint32_t b = 0; b < n_blocks; ++b) {
    const auto name_len = get<std::uint32_t>(is, path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw ParseError("truncated block name");
    const auto ndim = get<std::uint32_t>(is, path);
    if (ndim != 4) throw ParseError("block '" + name + "' has rank " + std::to_string(ndim) + ", expected 4");
    Shape s;
    s.n = get<std::int64_t>(is, path);
    s.c = get<std::int64_t>(is, path);
    s.h = get<std::int64_t>(is, path);
    s.w = get<std::int64_t>(is, path);
    const auto count = get<std::uint64_t>(is, path);
    if (static_cast<Index>(count) != s.count()) throw ParseError("block '" + name + "' count mismatch");
    Tensor<double> t(s);
    if (wide) {
      if (!is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(count * sizeof(double))))
        throw ParseError("truncated block '" + name + "'");
    } else {
      Eigen::VectorXf f(static_cast<Index>(count));
      if (!is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(count * sizeof(float))))
        throw ParseError("truncated block '" + name + "'");
      t.data = f.cast<double>();
    }
    file.blocks.emplace_back(std::move(name), std::move(t));
  }
  return file;
}

}  // namespace realism::nn
