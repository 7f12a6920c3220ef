#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ncae/tensor.hpp"

namespace ncae {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Little-endian binary weight container:
///   magic "NCAEWB1\0", u32 version,
///   u32 manifest length + UTF-8 manifest text (architecture description),
///   u32 tensor count, then per tensor:
///   u32 name length + name, u32 rank, u64 dims..., f64 data...
struct WeightBundle {
  std::string manifest;
  std::vector<NamedTensor> tensors;

  const Tensor& find(const std::string& name) const;
};

void write_weight_bundle(std::ostream& out, const WeightBundle& bundle);
void write_weight_bundle(const std::string& path, const WeightBundle& bundle);

WeightBundle read_weight_bundle(std::istream& in);
WeightBundle read_weight_bundle(const std::string& path);

}  // namespace ncae
