#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ncae/dsp.hpp"
#include "ncae/layers.hpp"
#include "ncae/tensor.hpp"

namespace ncae {

/// Per-feature min/max over the training split. Persisted with the model:
/// the normalization is part of the deployed artifact.
struct NormStats {
  std::vector<double> min;
  std::vector<double> max;

  static NormStats fit(const std::vector<MfccSequence>& train);
  bool empty() const { return min.empty(); }
};

/// (x - min) / (max - min), clamped to [0, 1]; constant features map to 0.5.
/// Feature axis is the last (D) axis of an N x S x D batch.
Tensor normalize(const Tensor& x, const NormStats& stats);
Tensor denormalize(const Tensor& x, const NormStats& stats);

/// Packs sequences into an N x S x D batch tensor.
Tensor batch_from_sequences(const std::vector<MfccSequence>& seqs);
Tensor batch_from_sequence(const MfccSequence& seq);

/// Anomaly-decision threshold stored with a trained model.
struct ModelThreshold {
  double theta = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  bool valid = false;
};

/// Common interface for reconstruction models operating on normalized
/// N x S x D batches. A trained model is immutable for inference; the
/// training-time forward/backward pair keeps an internal activation cache
/// and must have a single owner.
class ReconstructionModel {
 public:
  virtual ~ReconstructionModel() = default;

  virtual const std::string& kind() const = 0;
  virtual std::size_t seq_len() const = 0;   // S
  virtual std::size_t feat_dim() const = 0;  // D

  /// Inference path; input and output are N x S x D, values in [0, 1].
  virtual Tensor reconstruct(const Tensor& x) const = 0;

  /// Training path: forward with activation caching, then gradients of the
  /// parameters (aligned with parameters()) given dLoss/dOutput.
  virtual Tensor forward_cached(const Tensor& x) = 0;
  virtual std::vector<Tensor> backward(const Tensor& grad_output) = 0;

  virtual std::vector<Tensor*> parameters() = 0;
  virtual std::vector<std::string> parameter_names() const = 0;

  virtual void init_xavier(Rng& rng) = 0;

  std::size_t count_params() const;

  NormStats norm_stats;
  ModelThreshold threshold;
};

/// Three same-padding 1-D convolutions, each D -> D channels, convolving
/// along the sequence axis: no layer ever changes the temporal or channel
/// dimensionality. ReLU hidden activations, sigmoid output.
class NcaeModel : public ReconstructionModel {
 public:
  NcaeModel(std::size_t seq_len, std::size_t feat_dim, std::size_t kernel);

  const std::string& kind() const override;
  std::size_t seq_len() const override { return seq_len_; }
  std::size_t feat_dim() const override { return feat_dim_; }
  std::size_t kernel() const { return layers_[0].kernel(); }

  Tensor reconstruct(const Tensor& x) const override;
  Tensor forward_cached(const Tensor& x) override;
  std::vector<Tensor> backward(const Tensor& grad_output) override;

  std::vector<Tensor*> parameters() override;
  std::vector<std::string> parameter_names() const override;
  void init_xavier(Rng& rng) override;

  const Conv1dLayer& layer(std::size_t i) const { return layers_[i]; }
  static constexpr std::size_t kDepth = 3;

 private:
  std::size_t seq_len_;
  std::size_t feat_dim_;
  Conv1dLayer layers_[kDepth];
  std::vector<Tensor> cache_;  // pre-activation inputs per stage
};

/// Conventional bottleneck auto-encoder baseline: three stride-2
/// convolutions with channel expansion, a dense map to a 128-dimensional
/// latent vector, then dense + three nearest-neighbour x2 upsample/conv
/// stages back to S x D (cropped to S). Used as the comparison point for
/// inference cost; its parameter plan is not tied to any published row.
class BottleneckAeModel : public ReconstructionModel {
 public:
  BottleneckAeModel(std::size_t seq_len, std::size_t feat_dim,
                    std::size_t kernel, std::size_t latent_dim = 128);
  ~BottleneckAeModel() override;  // out of line: Cache is incomplete here

  const std::string& kind() const override;
  std::size_t seq_len() const override { return seq_len_; }
  std::size_t feat_dim() const override { return feat_dim_; }
  std::size_t kernel() const { return enc_[0].kernel(); }
  std::size_t latent_dim() const { return to_latent_.out_features(); }

  Tensor reconstruct(const Tensor& x) const override;
  Tensor forward_cached(const Tensor& x) override;
  std::vector<Tensor> backward(const Tensor& grad_output) override;

  std::vector<Tensor*> parameters() override;
  std::vector<std::string> parameter_names() const override;
  void init_xavier(Rng& rng) override;

  /// Latent vectors for a normalized batch (encoder output shape check).
  Tensor encode(const Tensor& x) const;

  // layer access for cost accounting
  const Conv1dLayer& enc_layer(std::size_t i) const { return enc_[i]; }
  const Conv1dLayer& dec_layer(std::size_t i) const { return dec_[i]; }
  const DenseLayer& to_latent_layer() const { return to_latent_; }
  const DenseLayer& from_latent_layer() const { return from_latent_; }
  std::size_t enc_len(std::size_t i) const { return enc_lens_[i]; }

 private:
  struct Cache;
  Tensor run_forward(const Tensor& x, Cache* cache) const;

  std::size_t seq_len_;
  std::size_t feat_dim_;
  std::size_t enc_lens_[4];  // sequence lengths S, L1, L2, L3
  Conv1dLayer enc_[3];
  DenseLayer to_latent_;
  DenseLayer from_latent_;
  Conv1dLayer dec_[3];
  std::unique_ptr<Cache> cache_;
};

/// Serializes a model (weights, norm stats, threshold) to the weight-bundle
/// format with a JSON manifest; byte-identical for identical models.
void save_model(const std::string& path, const ReconstructionModel& model);
std::unique_ptr<ReconstructionModel> load_model(const std::string& path);

/// The architecture manifest as JSON text (also embedded in the bundle).
std::string model_manifest_json(const ReconstructionModel& model);

}  // namespace ncae
