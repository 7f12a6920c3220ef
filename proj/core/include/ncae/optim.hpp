#pragma once

#include <cstddef>
#include <vector>

#include "ncae/rng.hpp"
#include "ncae/tensor.hpp"

namespace ncae {

/// Xavier (Glorot) uniform initialization: i.i.d. on [-a, a] with
/// a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_init(const std::vector<std::size_t>& shape, std::size_t fan_in,
                   std::size_t fan_out, Rng& rng);

/// Adam state for one flat list of parameter tensors.
struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  static AdamState create(const std::vector<Tensor*>& params,
                          double learning_rate);
};

/// One Adam update with bias correction, in place on `params`.
void adam_step(const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads, AdamState& state);

}  // namespace ncae
