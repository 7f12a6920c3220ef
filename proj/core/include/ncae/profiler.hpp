#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ncae/model.hpp"

namespace ncae {

/// Static cost accounting. Convention: a multiply-accumulate counts as 2
/// FLOPs, bias adds count, one final elementwise output pass (S*D) counts,
/// hidden activations do not. The convention is documented here, not taken
/// from any external source; it is self-consistent across all reference
/// kernel sizes.
struct LayerCost {
  std::string name;
  std::size_t params = 0;
  std::size_t flops = 0;
};

struct CostReport {
  std::size_t params = 0;
  std::size_t flops = 0;
  double mflops = 0.0;  // flops / 1e6 rounded to 3 decimals
  std::vector<LayerCost> layers;
};

/// Published cost constants for the comparison models (kernel size 3 where
/// applicable). Used as read-only inputs to the ratio table, never
/// recomputed.
struct PublishedCosts {
  struct Entry {
    std::string name;
    std::size_t params;
    double mflops;
  };
  std::vector<Entry> entries;

  static PublishedCosts reference();
};

/// Walks the actual layer objects of a model; no hand-entered totals.
CostReport flops(const NcaeModel& model);
CostReport flops(const BottleneckAeModel& model);

struct CostRatio {
  std::string versus;
  double param_pct = 0.0;   // ncae params / other params * 100
  double mflops_pct = 0.0;  // ncae MFLOPs / other MFLOPs * 100
};

/// NCAE cost as a percentage of each published model's cost, using the
/// rounded MFLOPs figures on both sides.
std::vector<CostRatio> cost_ratios(const CostReport& ncae,
                                   const PublishedCosts& published);

/// Inverts the cost formula: recovers the sequence length S from published
/// NCAE MFLOPs rows (kernel -> MFLOPs). Throws if the kernels disagree or a
/// row fails the round-trip check.
std::size_t derive_S_from_flops(
    const std::vector<std::pair<std::size_t, double>>& kernel_mflops,
    std::size_t feat_dim = 128);

double round3(double v);

}  // namespace ncae
