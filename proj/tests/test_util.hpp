#pragma once

#include <filesystem>
#include <string>

namespace realism::testing {

/// Fresh empty directory under the test working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::current_path() / "scratch" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace realism::testing
