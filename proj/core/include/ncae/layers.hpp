#pragma once

#include <cstddef>

#include "ncae/rng.hpp"
#include "ncae/tensor.hpp"

namespace ncae {

/// 1-D convolution (cross-correlation, no kernel flip) over the sequence
/// axis. Zero padding of (kernel-1)/2 on both ends, so at stride 1 the
/// output sequence length equals the input length.
struct Conv1dLayer {
  Tensor weights;  // out_channels x in_channels x kernel
  Tensor bias;     // out_channels
  std::size_t stride = 1;

  Conv1dLayer() = default;
  Conv1dLayer(std::size_t out_channels, std::size_t in_channels,
              std::size_t kernel, std::size_t stride = 1);

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel() const { return weights.dim(2); }
  std::size_t padding() const { return (kernel() - 1) / 2; }
  std::size_t out_len(std::size_t in_len) const;
  std::size_t param_count() const { return weights.size() + bias.size(); }

  void init_xavier(Rng& rng);
};

/// input: N x C_in x S -> N x C_out x out_len(S)
Tensor conv1d_forward(const Tensor& input, const Conv1dLayer& layer);

struct Conv1dGrads {
  Tensor grad_input;
  Tensor grad_weights;
  Tensor grad_bias;
};

Conv1dGrads conv1d_backward(const Tensor& grad_out, const Tensor& input,
                            const Conv1dLayer& layer);

/// Fully connected layer on flattened per-sample features.
struct DenseLayer {
  Tensor weights;  // out_features x in_features
  Tensor bias;     // out_features

  DenseLayer() = default;
  DenseLayer(std::size_t out_features, std::size_t in_features);

  std::size_t out_features() const { return weights.dim(0); }
  std::size_t in_features() const { return weights.dim(1); }
  std::size_t param_count() const { return weights.size() + bias.size(); }

  void init_xavier(Rng& rng);
};

/// input: N x in_features -> N x out_features
Tensor dense_forward(const Tensor& input, const DenseLayer& layer);

struct DenseGrads {
  Tensor grad_input;
  Tensor grad_weights;
  Tensor grad_bias;
};

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input,
                          const DenseLayer& layer);

enum class Activation { kIdentity, kRelu, kSigmoid };

Tensor activation_forward(const Tensor& x, Activation kind);
/// grad w.r.t. x given upstream grad and the original input x.
Tensor activation_backward(const Tensor& grad_out, const Tensor& x,
                           Activation kind);

const char* activation_name(Activation kind);
Activation activation_from_name(const std::string& name);

/// Nearest-neighbour x2 upsampling along the sequence axis (N x C x S ->
/// N x C x 2S) and its adjoint.
Tensor upsample2_forward(const Tensor& input);
Tensor upsample2_backward(const Tensor& grad_out);

/// Keep the first `len` positions of the sequence axis; adjoint zero-pads.
Tensor crop_forward(const Tensor& input, std::size_t len);
Tensor crop_backward(const Tensor& grad_out, std::size_t original_len);

}  // namespace ncae
