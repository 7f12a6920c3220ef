#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "ncae/rng.hpp"
#include "ncae/tensor.hpp"

namespace testutil {

inline ncae::Tensor random_tensor(const std::vector<std::size_t>& shape,
                                  ncae::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  ncae::Tensor t = ncae::Tensor::zeros(shape);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

/// |a-b| relative to the larger magnitude; small values fall back to an
/// absolute scale so near-zero gradients do not blow the ratio up.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

/// Scratch directory under the system temp dir, wiped on construction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
