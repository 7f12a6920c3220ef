#include "ncae/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ncae {

Tensor xavier_init(const std::vector<std::size_t>& shape, std::size_t fan_in,
                   std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0)
    throw std::invalid_argument("xavier_init: fan_in and fan_out must be > 0");
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = rng.uniform(-a, a);
  return t;
}

AdamState AdamState::create(const std::vector<Tensor*>& params,
                            double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment.reserve(params.size());
  s.second_moment.reserve(params.size());
  for (const Tensor* p : params) {
    s.first_moment.push_back(Tensor::zeros(p->shape));
    s.second_moment.push_back(Tensor::zeros(p->shape));
  }
  return s;
}

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads, AdamState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size())
    throw std::invalid_argument("adam_step: parameter list mismatch");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(g))
      throw std::invalid_argument("adam_step: gradient shape mismatch for "
                                  "parameter " + std::to_string(i));
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g.data[j];
      v.data[j] =
          state.beta2 * v.data[j] + (1.0 - state.beta2) * g.data[j] * g.data[j];
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      p.data[j] -= state.learning_rate * mhat /
                   (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace ncae
