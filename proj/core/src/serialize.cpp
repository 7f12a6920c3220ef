#include "ncae/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ncae {
namespace {

constexpr char kMagic[8] = {'N', 'C', 'A', 'E', 'W', 'B', '1', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; big-endian hosts unsupported");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("weight bundle: truncated file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto len = get<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("weight bundle: truncated string");
  return s;
}

}  // namespace

const Tensor& WeightBundle::find(const std::string& name) const {
  for (const auto& nt : tensors)
    if (nt.name == name) return nt.tensor;
  throw std::runtime_error("weight bundle: tensor not found: " + name);
}

void write_weight_bundle(std::ostream& out, const WeightBundle& bundle) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put_string(out, bundle.manifest);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.tensors.size()));
  for (const auto& nt : bundle.tensors) {
    put_string(out, nt.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.tensor.rank()));
    for (std::size_t d : nt.tensor.shape)
      put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(nt.tensor.data.data()),
              static_cast<std::streamsize>(nt.tensor.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("weight bundle: write failed");
}

void write_weight_bundle(const std::string& path, const WeightBundle& bundle) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("weight bundle: cannot open " + path);
  write_weight_bundle(f, bundle);
}

WeightBundle read_weight_bundle(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("weight bundle: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("weight bundle: unsupported version " +
                             std::to_string(version));
  WeightBundle b;
  b.manifest = get_string(in);
  const auto count = get<std::uint32_t>(in);
  b.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = get_string(in);
    const auto rank = get<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("weight bundle: truncated tensor data");
    nt.tensor = std::move(t);
    b.tensors.push_back(std::move(nt));
  }
  return b;
}

WeightBundle read_weight_bundle(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("weight bundle: cannot open " + path);
  return read_weight_bundle(f);
}

}  // namespace ncae
