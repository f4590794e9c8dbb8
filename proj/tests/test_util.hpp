#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "protopipe/frame.hpp"
#include "protopipe/numerics.hpp"

namespace protopipe::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("protopipe_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Frame random_frame(std::mt19937_64& rng, int w, int h, int c) {
  Frame f(w, h, c);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(byte(rng));
  return f;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (double& x : m.row(r)) x = g(rng);
  return m;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Compares every regular file under two directories byte for byte.
inline bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
  namespace fs = std::filesystem;
  std::size_t count_a = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++count_a;
    const auto rel = fs::relative(entry.path(), a);
    if (!fs::exists(b / rel) || read_text(entry.path()) != read_text(b / rel)) return false;
  }
  std::size_t count_b = 0;
  for (const auto& entry : fs::recursive_directory_iterator(b)) count_b += entry.is_regular_file();
  return count_a == count_b;
}

}  // namespace protopipe::testing
