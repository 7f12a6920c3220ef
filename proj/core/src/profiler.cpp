#include "ncae/profiler.hpp"

#include <cmath>
#include <stdexcept>

namespace ncae {
namespace {

LayerCost conv_cost(const std::string& name, const Conv1dLayer& layer,
                    std::size_t out_len) {
  LayerCost c;
  c.name = name;
  c.params = layer.param_count();
  c.flops = 2 * layer.kernel() * layer.in_channels() * layer.out_channels() *
                out_len +
            layer.out_channels() * out_len;
  return c;
}

LayerCost dense_cost(const std::string& name, const DenseLayer& layer) {
  LayerCost c;
  c.name = name;
  c.params = layer.param_count();
  c.flops = 2 * layer.in_features() * layer.out_features() +
            layer.out_features();
  return c;
}

CostReport finish(CostReport report, std::size_t output_pass) {
  report.layers.push_back({"output_pass", 0, output_pass});
  for (const auto& l : report.layers) {
    report.params += l.params;
    report.flops += l.flops;
  }
  report.mflops = round3(static_cast<double>(report.flops) / 1e6);
  return report;
}

double trunc3(double v) { return std::floor(v * 1000.0) / 1000.0; }

}  // namespace

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

PublishedCosts PublishedCosts::reference() {
  // kernel size 3 rows for the convolutional models
  PublishedCosts p;
  p.entries = {
      {"FARED", 594432, 38.538},
      {"AE", 2726144, 40.001},
      {"VAE", 3250560, 41.050},
      {"HP-GAN", 3567233, 194.736},
  };
  return p;
}

CostReport flops(const NcaeModel& model) {
  CostReport report;
  const std::size_t s = model.seq_len();
  for (std::size_t i = 0; i < NcaeModel::kDepth; ++i)
    report.layers.push_back(
        conv_cost("conv" + std::to_string(i), model.layer(i), s));
  return finish(std::move(report), s * model.feat_dim());
}

CostReport flops(const BottleneckAeModel& model) {
  CostReport report;
  for (std::size_t i = 0; i < 3; ++i)
    report.layers.push_back(conv_cost("enc" + std::to_string(i),
                                      model.enc_layer(i),
                                      model.enc_len(i + 1)));
  report.layers.push_back(dense_cost("to_latent", model.to_latent_layer()));
  report.layers.push_back(
      dense_cost("from_latent", model.from_latent_layer()));
  std::size_t len = model.enc_len(3);
  for (std::size_t i = 0; i < 3; ++i) {
    len *= 2;  // nearest-neighbour upsample before each decoder conv
    report.layers.push_back(
        conv_cost("dec" + std::to_string(i), model.dec_layer(i), len));
  }
  return finish(std::move(report), model.seq_len() * model.feat_dim());
}

std::vector<CostRatio> cost_ratios(const CostReport& ncae,
                                   const PublishedCosts& published) {
  // Percentages are truncated (not rounded) at the third decimal; that is
  // the convention consistent with the reference ratio table.
  std::vector<CostRatio> out;
  out.reserve(published.entries.size());
  for (const auto& e : published.entries) {
    CostRatio r;
    r.versus = e.name;
    r.param_pct = trunc3(100.0 * static_cast<double>(ncae.params) /
                         static_cast<double>(e.params));
    r.mflops_pct = trunc3(100.0 * ncae.mflops / e.mflops);
    out.push_back(r);
  }
  return out;
}

std::size_t derive_S_from_flops(
    const std::vector<std::pair<std::size_t, double>>& kernel_mflops,
    std::size_t feat_dim) {
  if (kernel_mflops.empty())
    throw std::invalid_argument("derive_S_from_flops: no rows");
  std::size_t derived = 0;
  for (const auto& [kernel, mflops] : kernel_mflops) {
    // total = S * (3*(2*k*D^2 + D) + D) per the accounting convention
    const double denom = static_cast<double>(
        3 * (2 * kernel * feat_dim * feat_dim + feat_dim) + feat_dim);
    const auto s = static_cast<std::size_t>(std::llround(mflops * 1e6 / denom));
    const double roundtrip = round3(static_cast<double>(s) * denom / 1e6);
    if (s == 0 || roundtrip != round3(mflops))
      throw std::runtime_error(
          "derive_S_from_flops: row for kernel " + std::to_string(kernel) +
          " does not fit the accounting convention");
    if (derived == 0)
      derived = s;
    else if (derived != s)
      throw std::runtime_error(
          "derive_S_from_flops: inconsistent S across kernels (" +
          std::to_string(derived) + " vs " + std::to_string(s) + ")");
  }
  return derived;
}

}  // namespace ncae
