#include "ncae/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ncae/serialize.hpp"
#include "json.hpp"

namespace ncae {
namespace {

using json = nlohmann::json;

/// N x S x D -> N x D x S (feature axis becomes channels).
Tensor nsd_to_ncl(const Tensor& x) {
  const std::size_t n = x.dim(0), s = x.dim(1), d = x.dim(2);
  Tensor t = Tensor::zeros({n, d, s});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = 0; b < d; ++b)
        t.at3(i, b, a) = x.data[(i * s + a) * d + b];
  return t;
}

Tensor ncl_to_nsd(const Tensor& t) {
  const std::size_t n = t.dim(0), d = t.dim(1), s = t.dim(2);
  Tensor x = Tensor::zeros({n, s, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < d; ++b)
      for (std::size_t a = 0; a < s; ++a)
        x.data[(i * s + a) * d + b] = t.at3(i, b, a);
  return x;
}

void check_batch_shape(const Tensor& x, std::size_t s, std::size_t d,
                       const char* who) {
  if (x.rank() != 3 || x.dim(1) != s || x.dim(2) != d)
    throw std::invalid_argument(std::string(who) + ": expected N x " +
                                std::to_string(s) + " x " + std::to_string(d) +
                                ", got " + shape_str(x.shape));
}

}  // namespace

NormStats NormStats::fit(const std::vector<MfccSequence>& train) {
  if (train.empty())
    throw std::invalid_argument("NormStats::fit: empty training set");
  const std::size_t d = train.front().cols;
  NormStats st;
  st.min.assign(d, std::numeric_limits<double>::infinity());
  st.max.assign(d, -std::numeric_limits<double>::infinity());
  for (const auto& seq : train) {
    if (seq.cols != d)
      throw std::invalid_argument("NormStats::fit: feature dim mismatch");
    for (std::size_t s = 0; s < seq.rows; ++s)
      for (std::size_t f = 0; f < d; ++f) {
        const double v = seq.at(s, f);
        st.min[f] = std::min(st.min[f], v);
        st.max[f] = std::max(st.max[f], v);
      }
  }
  return st;
}

Tensor normalize(const Tensor& x, const NormStats& stats) {
  if (x.rank() != 3 || x.dim(2) != stats.min.size())
    throw std::invalid_argument("normalize: batch/stats shape mismatch");
  const std::size_t d = stats.min.size();
  Tensor out = x;
  const std::size_t rows = x.size() / d;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t f = 0; f < d; ++f) {
      const double lo = stats.min[f], hi = stats.max[f];
      double& v = out.data[r * d + f];
      if (hi == lo)
        v = 0.5;
      else
        v = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    }
  return out;
}

Tensor denormalize(const Tensor& x, const NormStats& stats) {
  if (x.rank() != 3 || x.dim(2) != stats.min.size())
    throw std::invalid_argument("denormalize: batch/stats shape mismatch");
  const std::size_t d = stats.min.size();
  Tensor out = x;
  const std::size_t rows = x.size() / d;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t f = 0; f < d; ++f) {
      const double lo = stats.min[f], hi = stats.max[f];
      double& v = out.data[r * d + f];
      v = lo + v * (hi - lo);
    }
  return out;
}

Tensor batch_from_sequences(const std::vector<MfccSequence>& seqs) {
  if (seqs.empty())
    throw std::invalid_argument("batch_from_sequences: empty list");
  const std::size_t s = seqs.front().rows, d = seqs.front().cols;
  Tensor x = Tensor::zeros({seqs.size(), s, d});
  for (std::size_t n = 0; n < seqs.size(); ++n) {
    if (seqs[n].rows != s || seqs[n].cols != d)
      throw std::invalid_argument("batch_from_sequences: ragged sequences");
    std::copy(seqs[n].data.begin(), seqs[n].data.end(),
              x.data.begin() + static_cast<std::ptrdiff_t>(n * s * d));
  }
  return x;
}

Tensor batch_from_sequence(const MfccSequence& seq) {
  return batch_from_sequences({seq});
}

std::size_t ReconstructionModel::count_params() const {
  auto* self = const_cast<ReconstructionModel*>(this);
  std::size_t n = 0;
  for (const Tensor* p : self->parameters()) n += p->size();
  return n;
}

// ---------------------------------------------------------------- NCAE

NcaeModel::NcaeModel(std::size_t seq_len, std::size_t feat_dim,
                     std::size_t kernel)
    : seq_len_(seq_len), feat_dim_(feat_dim) {
  for (auto& l : layers_) l = Conv1dLayer(feat_dim, feat_dim, kernel);
}

const std::string& NcaeModel::kind() const {
  static const std::string k = "ncae";
  return k;
}

Tensor NcaeModel::reconstruct(const Tensor& x) const {
  check_batch_shape(x, seq_len_, feat_dim_, "NcaeModel::reconstruct");
  Tensor h = nsd_to_ncl(x);
  for (std::size_t i = 0; i < kDepth; ++i) {
    h = conv1d_forward(h, layers_[i]);
    h = activation_forward(
        h, i + 1 == kDepth ? Activation::kSigmoid : Activation::kRelu);
  }
  return ncl_to_nsd(h);
}

Tensor NcaeModel::forward_cached(const Tensor& x) {
  check_batch_shape(x, seq_len_, feat_dim_, "NcaeModel::forward_cached");
  cache_.clear();
  Tensor h = nsd_to_ncl(x);
  for (std::size_t i = 0; i < kDepth; ++i) {
    cache_.push_back(h);  // layer input
    Tensor z = conv1d_forward(h, layers_[i]);
    cache_.push_back(z);  // pre-activation
    h = activation_forward(
        z, i + 1 == kDepth ? Activation::kSigmoid : Activation::kRelu);
  }
  return ncl_to_nsd(h);
}

std::vector<Tensor> NcaeModel::backward(const Tensor& grad_output) {
  if (cache_.size() != 2 * kDepth)
    throw std::logic_error("NcaeModel::backward: no cached forward pass");
  Tensor g = nsd_to_ncl(grad_output);
  std::vector<Tensor> grads(2 * kDepth);
  for (std::size_t i = kDepth; i-- > 0;) {
    const Tensor& z = cache_[2 * i + 1];
    const Tensor& input = cache_[2 * i];
    g = activation_backward(
        g, z, i + 1 == kDepth ? Activation::kSigmoid : Activation::kRelu);
    Conv1dGrads cg = conv1d_backward(g, input, layers_[i]);
    grads[2 * i] = std::move(cg.grad_weights);
    grads[2 * i + 1] = std::move(cg.grad_bias);
    g = std::move(cg.grad_input);
  }
  return grads;
}

std::vector<Tensor*> NcaeModel::parameters() {
  std::vector<Tensor*> p;
  for (auto& l : layers_) {
    p.push_back(&l.weights);
    p.push_back(&l.bias);
  }
  return p;
}

std::vector<std::string> NcaeModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < kDepth; ++i) {
    names.push_back("conv" + std::to_string(i) + ".weight");
    names.push_back("conv" + std::to_string(i) + ".bias");
  }
  return names;
}

void NcaeModel::init_xavier(Rng& rng) {
  for (auto& l : layers_) l.init_xavier(rng);
}

// ---------------------------------------------------- bottleneck baseline

struct BottleneckAeModel::Cache {
  Tensor enc_in[3];  // inputs to encoder convs
  Tensor enc_z[3];   // encoder pre-activations
  Tensor flat;       // flattened encoder output (input to to_latent)
  Tensor latent;     // latent vectors (input to from_latent)
  Tensor fl_z;       // from_latent pre-activation
  Tensor dec_in[3];  // upsampled inputs to decoder convs
  Tensor dec_z[3];   // decoder pre-activations
  Tensor cropped;    // pre-sigmoid output, cropped to S
};

BottleneckAeModel::BottleneckAeModel(std::size_t seq_len,
                                     std::size_t feat_dim, std::size_t kernel,
                                     std::size_t latent_dim)
    : seq_len_(seq_len), feat_dim_(feat_dim) {
  // channel plan expands while the temporal axis halves
  const std::size_t c1 = 2 * feat_dim, c2 = 4 * feat_dim, c3 = 4 * feat_dim;
  enc_[0] = Conv1dLayer(c1, feat_dim, kernel, 2);
  enc_[1] = Conv1dLayer(c2, c1, kernel, 2);
  enc_[2] = Conv1dLayer(c3, c2, kernel, 2);
  enc_lens_[0] = seq_len;
  for (int i = 0; i < 3; ++i)
    enc_lens_[i + 1] = enc_[i].out_len(enc_lens_[i]);
  const std::size_t l3 = enc_lens_[3];
  if (8 * l3 < seq_len)
    throw std::logic_error("bottleneck: decoder cannot reach input length");
  to_latent_ = DenseLayer(latent_dim, c3 * l3);
  from_latent_ = DenseLayer(c3 * l3, latent_dim);
  dec_[0] = Conv1dLayer(c3, c3, kernel);
  dec_[1] = Conv1dLayer(c2, c3, kernel);
  dec_[2] = Conv1dLayer(feat_dim, c2, kernel);
}

BottleneckAeModel::~BottleneckAeModel() = default;

const std::string& BottleneckAeModel::kind() const {
  static const std::string k = "bottleneck-ae";
  return k;
}

Tensor BottleneckAeModel::run_forward(const Tensor& x, Cache* cache) const {
  check_batch_shape(x, seq_len_, feat_dim_, "BottleneckAeModel");
  const std::size_t batch = x.dim(0);
  const std::size_t c3 = enc_[2].out_channels();
  const std::size_t l3 = enc_lens_[3];

  Tensor h = nsd_to_ncl(x);
  for (int i = 0; i < 3; ++i) {
    if (cache) cache->enc_in[i] = h;
    Tensor z = conv1d_forward(h, enc_[i]);
    if (cache) cache->enc_z[i] = z;
    h = activation_forward(z, Activation::kRelu);
  }
  Tensor flat = h;
  flat.shape = {batch, c3 * l3};
  if (cache) cache->flat = flat;

  Tensor latent = dense_forward(flat, to_latent_);  // identity activation
  if (cache) cache->latent = latent;

  Tensor fl_z = dense_forward(latent, from_latent_);
  if (cache) cache->fl_z = fl_z;
  Tensor d = activation_forward(fl_z, Activation::kRelu);
  d.shape = {batch, c3, l3};

  for (int i = 0; i < 3; ++i) {
    Tensor up = upsample2_forward(d);
    if (cache) cache->dec_in[i] = up;
    Tensor z = conv1d_forward(up, dec_[i]);
    if (cache) cache->dec_z[i] = z;
    d = i < 2 ? activation_forward(z, Activation::kRelu) : std::move(z);
  }
  Tensor cropped = crop_forward(d, seq_len_);
  if (cache) cache->cropped = cropped;
  Tensor out = activation_forward(cropped, Activation::kSigmoid);
  return ncl_to_nsd(out);
}

Tensor BottleneckAeModel::reconstruct(const Tensor& x) const {
  return run_forward(x, nullptr);
}

Tensor BottleneckAeModel::forward_cached(const Tensor& x) {
  cache_ = std::make_unique<Cache>();
  return run_forward(x, cache_.get());
}

Tensor BottleneckAeModel::encode(const Tensor& x) const {
  check_batch_shape(x, seq_len_, feat_dim_, "BottleneckAeModel::encode");
  Tensor h = nsd_to_ncl(x);
  for (int i = 0; i < 3; ++i)
    h = activation_forward(conv1d_forward(h, enc_[i]), Activation::kRelu);
  h.shape = {x.dim(0), enc_[2].out_channels() * enc_lens_[3]};
  return dense_forward(h, to_latent_);
}

std::vector<Tensor> BottleneckAeModel::backward(const Tensor& grad_output) {
  if (!cache_)
    throw std::logic_error("BottleneckAeModel::backward: no cached forward");
  const Cache& c = *cache_;
  const std::size_t batch = grad_output.dim(0);
  const std::size_t c3 = enc_[2].out_channels();
  const std::size_t l3 = enc_lens_[3];

  std::vector<Tensor> grads(parameter_names().size());
  // parameter order: enc0..enc2, to_latent, from_latent, dec0..dec2
  const std::size_t gi_enc = 0, gi_tol = 6, gi_froml = 8, gi_dec = 10;

  Tensor g = nsd_to_ncl(grad_output);
  g = activation_backward(g, c.cropped, Activation::kSigmoid);
  g = crop_backward(g, 8 * l3);

  for (int i = 2; i >= 0; --i) {
    if (i < 2) g = activation_backward(g, c.dec_z[i], Activation::kRelu);
    Conv1dGrads cg = conv1d_backward(g, c.dec_in[i], dec_[i]);
    grads[gi_dec + 2 * static_cast<std::size_t>(i)] = std::move(cg.grad_weights);
    grads[gi_dec + 2 * static_cast<std::size_t>(i) + 1] = std::move(cg.grad_bias);
    g = upsample2_backward(cg.grad_input);
  }

  g.shape = {batch, c3 * l3};
  {
    g = activation_backward(g, c.fl_z, Activation::kRelu);
    DenseGrads dg = dense_backward(g, c.latent, from_latent_);
    grads[gi_froml] = std::move(dg.grad_weights);
    grads[gi_froml + 1] = std::move(dg.grad_bias);
    g = std::move(dg.grad_input);
  }
  {
    DenseGrads dg = dense_backward(g, c.flat, to_latent_);
    grads[gi_tol] = std::move(dg.grad_weights);
    grads[gi_tol + 1] = std::move(dg.grad_bias);
    g = std::move(dg.grad_input);
  }
  g.shape = {batch, c3, l3};

  for (int i = 2; i >= 0; --i) {
    g = activation_backward(g, c.enc_z[i], Activation::kRelu);
    Conv1dGrads cg = conv1d_backward(g, c.enc_in[i], enc_[i]);
    grads[gi_enc + 2 * static_cast<std::size_t>(i)] = std::move(cg.grad_weights);
    grads[gi_enc + 2 * static_cast<std::size_t>(i) + 1] = std::move(cg.grad_bias);
    g = std::move(cg.grad_input);
  }
  return grads;
}

std::vector<Tensor*> BottleneckAeModel::parameters() {
  std::vector<Tensor*> p;
  for (auto& l : enc_) {
    p.push_back(&l.weights);
    p.push_back(&l.bias);
  }
  p.push_back(&to_latent_.weights);
  p.push_back(&to_latent_.bias);
  p.push_back(&from_latent_.weights);
  p.push_back(&from_latent_.bias);
  for (auto& l : dec_) {
    p.push_back(&l.weights);
    p.push_back(&l.bias);
  }
  return p;
}

std::vector<std::string> BottleneckAeModel::parameter_names() const {
  std::vector<std::string> names;
  for (int i = 0; i < 3; ++i) {
    names.push_back("enc" + std::to_string(i) + ".weight");
    names.push_back("enc" + std::to_string(i) + ".bias");
  }
  names.insert(names.end(), {"to_latent.weight", "to_latent.bias",
                             "from_latent.weight", "from_latent.bias"});
  for (int i = 0; i < 3; ++i) {
    names.push_back("dec" + std::to_string(i) + ".weight");
    names.push_back("dec" + std::to_string(i) + ".bias");
  }
  return names;
}

void BottleneckAeModel::init_xavier(Rng& rng) {
  for (auto& l : enc_) l.init_xavier(rng);
  to_latent_.init_xavier(rng);
  from_latent_.init_xavier(rng);
  for (auto& l : dec_) l.init_xavier(rng);
}

// ------------------------------------------------------- serialization

std::string model_manifest_json(const ReconstructionModel& model) {
  json j;
  j["format"] = "ncae-model";
  j["version"] = 1;
  j["kind"] = model.kind();
  j["seq_len"] = model.seq_len();
  j["feat_dim"] = model.feat_dim();
  if (const auto* m = dynamic_cast<const NcaeModel*>(&model)) {
    j["kernel"] = m->kernel();
  } else if (const auto* b = dynamic_cast<const BottleneckAeModel*>(&model)) {
    j["kernel"] = b->kernel();
    j["latent_dim"] = b->latent_dim();
  }
  j["hidden_activation"] = "relu";
  j["output_activation"] = "sigmoid";
  j["norm_min"] = model.norm_stats.min;
  j["norm_max"] = model.norm_stats.max;
  if (model.threshold.valid) {
    j["threshold"] = {{"theta", model.threshold.theta},
                      {"mu", model.threshold.mu},
                      {"sigma", model.threshold.sigma}};
  }
  return j.dump(2);
}

void save_model(const std::string& path, const ReconstructionModel& model) {
  WeightBundle bundle;
  bundle.manifest = model_manifest_json(model);
  auto* self = const_cast<ReconstructionModel*>(&model);
  const auto names = model.parameter_names();
  const auto params = self->parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    bundle.tensors.push_back({names[i], *params[i]});
  write_weight_bundle(path, bundle);
}

std::unique_ptr<ReconstructionModel> load_model(const std::string& path) {
  const WeightBundle bundle = read_weight_bundle(path);
  json j = json::parse(bundle.manifest);
  if (j.value("format", "") != "ncae-model")
    throw std::runtime_error("load_model: not a model file: " + path);
  const std::string kind = j.at("kind");
  const std::size_t s = j.at("seq_len");
  const std::size_t d = j.at("feat_dim");
  const std::size_t k = j.at("kernel");

  std::unique_ptr<ReconstructionModel> model;
  if (kind == "ncae") {
    model = std::make_unique<NcaeModel>(s, d, k);
  } else if (kind == "bottleneck-ae") {
    model = std::make_unique<BottleneckAeModel>(
        s, d, k, j.value("latent_dim", std::size_t{128}));
  } else {
    throw std::runtime_error("load_model: unknown model kind: " + kind);
  }

  const auto names = model->parameter_names();
  const auto params = model->parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& stored = bundle.find(names[i]);
    if (!stored.same_shape(*params[i]))
      throw std::runtime_error("load_model: shape mismatch for " + names[i]);
    *params[i] = stored;
  }

  model->norm_stats.min = j.at("norm_min").get<std::vector<double>>();
  model->norm_stats.max = j.at("norm_max").get<std::vector<double>>();
  if (j.contains("threshold")) {
    model->threshold.theta = j["threshold"].at("theta");
    model->threshold.mu = j["threshold"].at("mu");
    model->threshold.sigma = j["threshold"].at("sigma");
    model->threshold.valid = true;
  }
  return model;
}

}  // namespace ncae
