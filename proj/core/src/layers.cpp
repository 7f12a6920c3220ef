#include "ncae/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ncae/optim.hpp"

namespace ncae {

Conv1dLayer::Conv1dLayer(std::size_t out_channels, std::size_t in_channels,
                         std::size_t kernel, std::size_t stride_)
    : weights(Tensor::zeros({out_channels, in_channels, kernel})),
      bias(Tensor::zeros({out_channels})) {
  if (kernel % 2 == 0)
    throw std::invalid_argument("conv1d: kernel must be odd, got " +
                                std::to_string(kernel));
  if (stride_ == 0) throw std::invalid_argument("conv1d: stride must be > 0");
  stride = stride_;
}

std::size_t Conv1dLayer::out_len(std::size_t in_len) const {
  const std::size_t padded = in_len + 2 * padding();
  if (padded < kernel())
    throw std::invalid_argument("conv1d: input too short for kernel");
  return (padded - kernel()) / stride + 1;
}

void Conv1dLayer::init_xavier(Rng& rng) {
  weights = xavier_init(weights.shape, in_channels() * kernel(),
                        out_channels() * kernel(), rng);
  bias.fill(0.0);
}

Tensor conv1d_forward(const Tensor& input, const Conv1dLayer& layer) {
  if (input.rank() != 3)
    throw std::invalid_argument("conv1d_forward: input must be N x C x S");
  if (input.dim(1) != layer.in_channels())
    throw std::invalid_argument(
        "conv1d_forward: channel mismatch, input has " +
        std::to_string(input.dim(1)) + ", layer expects " +
        std::to_string(layer.in_channels()));
  const std::size_t batch = input.dim(0);
  const std::size_t c_in = layer.in_channels();
  const std::size_t c_out = layer.out_channels();
  const std::size_t in_len = input.dim(2);
  const std::size_t k = layer.kernel();
  const std::size_t out_len = layer.out_len(in_len);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(layer.padding());
  const std::size_t stride = layer.stride;

  Tensor out = Tensor::zeros({batch, c_out, out_len});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t co = 0; co < c_out; ++co) {
      double* dst = &out.at3(n, co, 0);
      const double b = layer.bias[co];
      for (std::size_t so = 0; so < out_len; ++so) dst[so] = b;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* src = &input.at3(n, ci, 0);
        for (std::size_t kt = 0; kt < k; ++kt) {
          const double w =
              layer.weights[(co * c_in + ci) * k + kt];
          const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(kt) - pad;
          // valid output range given zero padding outside [0, in_len)
          std::size_t so_begin = 0;
          if (offset < 0) {
            // need so*stride + offset >= 0
            so_begin = static_cast<std::size_t>(
                (-offset + static_cast<std::ptrdiff_t>(stride) - 1) /
                static_cast<std::ptrdiff_t>(stride));
          }
          std::size_t so_end = out_len;
          // need so*stride + offset < in_len
          const std::ptrdiff_t hi =
              static_cast<std::ptrdiff_t>(in_len) - offset;
          if (hi <= 0) continue;
          const std::size_t max_so =
              (static_cast<std::size_t>(hi) + stride - 1) / stride;
          if (max_so < so_end) so_end = max_so;
          const double* s = src + so_begin * stride + offset;
          if (stride == 1) {
            for (std::size_t so = so_begin; so < so_end; ++so)
              dst[so] += w * s[so - so_begin];
          } else {
            for (std::size_t so = so_begin; so < so_end; ++so)
              dst[so] += w * s[(so - so_begin) * stride];
          }
        }
      }
    }
  }
  return out;
}

Conv1dGrads conv1d_backward(const Tensor& grad_out, const Tensor& input,
                            const Conv1dLayer& layer) {
  if (input.rank() != 3 || grad_out.rank() != 3)
    throw std::invalid_argument("conv1d_backward: tensors must be N x C x S");
  const std::size_t batch = input.dim(0);
  const std::size_t c_in = layer.in_channels();
  const std::size_t c_out = layer.out_channels();
  const std::size_t in_len = input.dim(2);
  const std::size_t k = layer.kernel();
  const std::size_t out_len = layer.out_len(in_len);
  if (grad_out.dim(0) != batch || grad_out.dim(1) != c_out ||
      grad_out.dim(2) != out_len)
    throw std::invalid_argument("conv1d_backward: grad_out shape " +
                                shape_str(grad_out.shape) +
                                " inconsistent with forward output");
  if (input.dim(1) != c_in)
    throw std::invalid_argument("conv1d_backward: channel mismatch");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(layer.padding());
  const std::size_t stride = layer.stride;

  Conv1dGrads g;
  g.grad_input = Tensor::zeros(input.shape);
  g.grad_weights = Tensor::zeros(layer.weights.shape);
  g.grad_bias = Tensor::zeros(layer.bias.shape);

  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t co = 0; co < c_out; ++co) {
      const double* go = &grad_out.at3(n, co, 0);
      double bsum = 0.0;
      for (std::size_t so = 0; so < out_len; ++so) bsum += go[so];
      g.grad_bias[co] += bsum;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* src = &input.at3(n, ci, 0);
        double* gi = &g.grad_input.at3(n, ci, 0);
        for (std::size_t kt = 0; kt < k; ++kt) {
          const std::size_t widx = (co * c_in + ci) * k + kt;
          const double w = layer.weights[widx];
          const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(kt) - pad;
          double wsum = 0.0;
          for (std::size_t so = 0; so < out_len; ++so) {
            const std::ptrdiff_t si =
                static_cast<std::ptrdiff_t>(so * stride) + offset;
            if (si < 0 || si >= static_cast<std::ptrdiff_t>(in_len)) continue;
            wsum += go[so] * src[si];
            gi[si] += go[so] * w;
          }
          g.grad_weights[widx] += wsum;
        }
      }
    }
  }
  return g;
}

DenseLayer::DenseLayer(std::size_t out_features, std::size_t in_features)
    : weights(Tensor::zeros({out_features, in_features})),
      bias(Tensor::zeros({out_features})) {}

void DenseLayer::init_xavier(Rng& rng) {
  weights = xavier_init(weights.shape, in_features(), out_features(), rng);
  bias.fill(0.0);
}

Tensor dense_forward(const Tensor& input, const DenseLayer& layer) {
  if (input.rank() != 2)
    throw std::invalid_argument("dense_forward: input must be N x features");
  if (input.dim(1) != layer.in_features())
    throw std::invalid_argument("dense_forward: feature mismatch");
  const std::size_t batch = input.dim(0);
  const std::size_t in_f = layer.in_features();
  const std::size_t out_f = layer.out_features();
  Tensor out = Tensor::zeros({batch, out_f});
  for (std::size_t n = 0; n < batch; ++n) {
    const double* x = &input.data[n * in_f];
    for (std::size_t o = 0; o < out_f; ++o) {
      const double* w = &layer.weights.data[o * in_f];
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < in_f; ++i) acc += w[i] * x[i];
      out.data[n * out_f + o] = acc;
    }
  }
  return out;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input,
                          const DenseLayer& layer) {
  const std::size_t batch = input.dim(0);
  const std::size_t in_f = layer.in_features();
  const std::size_t out_f = layer.out_features();
  if (grad_out.rank() != 2 || grad_out.dim(0) != batch ||
      grad_out.dim(1) != out_f)
    throw std::invalid_argument("dense_backward: grad_out shape mismatch");
  DenseGrads g;
  g.grad_input = Tensor::zeros(input.shape);
  g.grad_weights = Tensor::zeros(layer.weights.shape);
  g.grad_bias = Tensor::zeros(layer.bias.shape);
  for (std::size_t n = 0; n < batch; ++n) {
    const double* x = &input.data[n * in_f];
    double* gi = &g.grad_input.data[n * in_f];
    for (std::size_t o = 0; o < out_f; ++o) {
      const double go = grad_out.data[n * out_f + o];
      g.grad_bias[o] += go;
      const double* w = &layer.weights.data[o * in_f];
      double* gw = &g.grad_weights.data[o * in_f];
      for (std::size_t i = 0; i < in_f; ++i) {
        gw[i] += go * x[i];
        gi[i] += go * w[i];
      }
    }
  }
  return g;
}

Tensor activation_forward(const Tensor& x, Activation kind) {
  Tensor out = x;
  switch (kind) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      // std::max propagates NaN here, so divergence surfaces in the loss
      // instead of being silently zeroed.
      for (double& v : out.data) v = std::max(v, 0.0);
      break;
    case Activation::kSigmoid:
      for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
      break;
  }
  return out;
}

Tensor activation_backward(const Tensor& grad_out, const Tensor& x,
                           Activation kind) {
  if (!grad_out.same_shape(x))
    throw std::invalid_argument("activation_backward: shape mismatch");
  Tensor g = grad_out;
  switch (kind) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (x.data[i] <= 0.0) g.data[i] = 0.0;
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        const double y = 1.0 / (1.0 + std::exp(-x.data[i]));
        g.data[i] *= y * (1.0 - y);
      }
      break;
  }
  return g;
}

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw std::invalid_argument("unknown activation: " + name);
}

Tensor upsample2_forward(const Tensor& input) {
  if (input.rank() != 3)
    throw std::invalid_argument("upsample2_forward: input must be N x C x S");
  const std::size_t batch = input.dim(0), ch = input.dim(1),
                    len = input.dim(2);
  Tensor out = Tensor::zeros({batch, ch, 2 * len});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c) {
      const double* src = &input.at3(n, c, 0);
      double* dst = &out.at3(n, c, 0);
      for (std::size_t s = 0; s < len; ++s) {
        dst[2 * s] = src[s];
        dst[2 * s + 1] = src[s];
      }
    }
  return out;
}

Tensor upsample2_backward(const Tensor& grad_out) {
  if (grad_out.rank() != 3 || grad_out.dim(2) % 2 != 0)
    throw std::invalid_argument("upsample2_backward: bad grad shape");
  const std::size_t batch = grad_out.dim(0), ch = grad_out.dim(1),
                    len = grad_out.dim(2) / 2;
  Tensor g = Tensor::zeros({batch, ch, len});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c) {
      const double* go = &grad_out.at3(n, c, 0);
      double* dst = &g.at3(n, c, 0);
      for (std::size_t s = 0; s < len; ++s)
        dst[s] = go[2 * s] + go[2 * s + 1];
    }
  return g;
}

Tensor crop_forward(const Tensor& input, std::size_t len) {
  if (input.rank() != 3 || input.dim(2) < len)
    throw std::invalid_argument("crop_forward: input shorter than crop");
  const std::size_t batch = input.dim(0), ch = input.dim(1);
  Tensor out = Tensor::zeros({batch, ch, len});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t s = 0; s < len; ++s)
        out.at3(n, c, s) = input.at3(n, c, s);
  return out;
}

Tensor crop_backward(const Tensor& grad_out, std::size_t original_len) {
  const std::size_t batch = grad_out.dim(0), ch = grad_out.dim(1),
                    len = grad_out.dim(2);
  if (original_len < len)
    throw std::invalid_argument("crop_backward: original shorter than crop");
  Tensor g = Tensor::zeros({batch, ch, original_len});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t s = 0; s < len; ++s)
        g.at3(n, c, s) = grad_out.at3(n, c, s);
  return g;
}

}  // namespace ncae
