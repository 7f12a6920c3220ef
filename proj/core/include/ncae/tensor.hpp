#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ncae {

/// Dense row-major N-dimensional array of doubles. 64-bit floats are used
/// everywhere: the models are small and exact reproducibility matters more
/// than speed.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  /// 3-d accessors for the (batch, channel, position) layout used by the
  /// network code. Unchecked.
  double& at3(std::size_t n, std::size_t c, std::size_t s) {
    return data[(n * shape[1] + c) * shape[2] + s];
  }
  const double& at3(std::size_t n, std::size_t c, std::size_t s) const {
    return data[(n * shape[1] + c) * shape[2] + s];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  void fill(double value);

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double k);
};

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

/// Max |a-b| over all elements; throws on shape mismatch.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace ncae
