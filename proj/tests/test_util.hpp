#pragma once

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "fusionrec/matrix.hpp"
#include "fusionrec/rng.hpp"

namespace testutil {

inline const std::filesystem::path kDataDir = FUSIONREC_TEST_DATA_DIR;

inline bool have_ml100k() { return std::filesystem::exists(kDataDir / "u.data"); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fusionrec_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <typename T = double>
fusionrec::Matrix<T> random_matrix(std::size_t rows, std::size_t cols, fusionrec::Rng& rng, double scale = 1.0) {
  fusionrec::Matrix<T> m(rows, cols);
  for (auto& v : m.values()) v = static_cast<T>(scale * fusionrec::uniform(rng, -1.0, 1.0));
  return m;
}

template <typename T>
double max_abs_diff(const fusionrec::Matrix<T>& a, const fusionrec::Matrix<T>& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a.data()[i] - b.data()[i])));
  return m;
}

}  // namespace testutil
