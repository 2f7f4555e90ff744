#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "looptune/space.hpp"

namespace looptune::testing {

namespace fs = std::filesystem;

inline fs::path fixture(const std::string& relative) {
  return fs::path(LOOPTUNE_FIXTURE_DIR) / relative;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "looptune-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Closed form of fixtures/synthetic/model.sh: minimum 1.0 at (7, 3, 5).
inline double synthetic_surface(int x, int y, int z) {
  const double dx = x - 7, dy = y - 3, dz = z - 5;
  return 1.0 + 0.02 * dx * dx + 0.03 * dy * dy + 0.015 * dz * dz + 0.01 * std::abs(dx * dy);
}

inline double synthetic_surface(const Configuration& cfg) {
  return synthetic_surface(std::stoi(*cfg.at("P0")), std::stoi(*cfg.at("P1")),
                           std::stoi(*cfg.at("P2")));
}

// Parameters P0..P{n-1} with ordinal values 0..size-1.
inline ParamSpace ordinal_grid(std::size_t params, std::size_t size, std::uint64_t seed = 1234) {
  std::vector<Parameter> ps;
  for (std::size_t p = 0; p < params; ++p) {
    Parameter param;
    param.name = "P" + std::to_string(p);
    param.kind = ParamKind::ordinal;
    for (std::size_t v = 0; v < size; ++v) param.values.push_back(std::to_string(v));
    param.default_value = "0";
    ps.push_back(std::move(param));
  }
  return ParamSpace(std::move(ps), {}, {}, seed);
}

}  // namespace looptune::testing
