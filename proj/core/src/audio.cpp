#include "ncae/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ncae {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct FmtChunk {
  std::uint16_t audio_format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_wav: cannot open " + path);

  char tag[4];
  std::uint32_t riff_size = 0;
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("read_wav: not a RIFF file: " + path);
  f.read(reinterpret_cast<char*>(&riff_size), 4);
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: not a WAVE file: " + path);

  FmtChunk fmt;
  bool have_fmt = false;
  std::vector<char> data;
  bool have_data = false;

  while (f.read(tag, 4)) {
    std::uint32_t chunk_size = 0;
    f.read(reinterpret_cast<char*>(&chunk_size), 4);
    if (!f) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::vector<char> buf(chunk_size);
      f.read(buf.data(), chunk_size);
      if (chunk_size < 16)
        throw std::runtime_error("read_wav: malformed fmt chunk: " + path);
      std::memcpy(&fmt.audio_format, buf.data() + 0, 2);
      std::memcpy(&fmt.channels, buf.data() + 2, 2);
      std::memcpy(&fmt.sample_rate, buf.data() + 4, 4);
      std::memcpy(&fmt.bits_per_sample, buf.data() + 14, 2);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(chunk_size);
      f.read(data.data(), chunk_size);
      have_data = true;
    } else {
      f.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
    if (chunk_size & 1) f.seekg(1, std::ios::cur);
  }

  if (!have_fmt || !have_data)
    throw std::runtime_error("read_wav: missing fmt or data chunk: " + path);
  if (fmt.channels != 1)
    throw std::runtime_error("read_wav: only mono supported, file has " +
                             std::to_string(fmt.channels) + " channels: " +
                             path);

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(fmt.sample_rate);
  if (fmt.audio_format == 1 && fmt.bits_per_sample == 16) {
    const std::size_t n = data.size() / 2;
    audio.samples.resize(n);
    const auto* raw = reinterpret_cast<const std::int16_t*>(data.data());
    for (std::size_t i = 0; i < n; ++i)
      audio.samples[i] = static_cast<double>(raw[i]) / 32768.0;
  } else if (fmt.audio_format == 3 && fmt.bits_per_sample == 32) {
    const std::size_t n = data.size() / 4;
    audio.samples.resize(n);
    const auto* raw = reinterpret_cast<const float*>(data.data());
    for (std::size_t i = 0; i < n; ++i)
      audio.samples[i] = static_cast<double>(raw[i]);
  } else {
    throw std::runtime_error(
        "read_wav: unsupported format (need PCM16 or float32), got format=" +
        std::to_string(fmt.audio_format) + " bits=" +
        std::to_string(fmt.bits_per_sample) + ": " + path);
  }
  for (double v : audio.samples)
    if (!std::isfinite(v))
      throw std::runtime_error("read_wav: non-finite sample in " + path);
  return audio;
}

void write_wav(const std::string& path, const AudioBuffer& audio,
               WavFormat format) {
  if (audio.sample_rate <= 0)
    throw std::invalid_argument("write_wav: sample_rate must be > 0");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_wav: cannot open " + path);

  const std::uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const std::uint16_t audio_format = format == WavFormat::kPcm16 ? 1 : 3;
  const std::uint32_t bytes_per_sample = bits / 8;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(audio.samples.size()) * bytes_per_sample;
  const auto rate = static_cast<std::uint32_t>(audio.sample_rate);

  f.write("RIFF", 4);
  put<std::uint32_t>(f, 36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put<std::uint32_t>(f, 16);
  put<std::uint16_t>(f, audio_format);
  put<std::uint16_t>(f, 1);  // mono
  put<std::uint32_t>(f, rate);
  put<std::uint32_t>(f, rate * bytes_per_sample);
  put<std::uint16_t>(f, static_cast<std::uint16_t>(bytes_per_sample));
  put<std::uint16_t>(f, bits);
  f.write("data", 4);
  put<std::uint32_t>(f, data_size);

  if (format == WavFormat::kPcm16) {
    for (double v : audio.samples) {
      const double scaled = std::clamp(v, -1.0, 32767.0 / 32768.0) * 32768.0;
      put<std::int16_t>(f, static_cast<std::int16_t>(std::lrint(scaled)));
    }
  } else {
    for (double v : audio.samples) put<float>(f, static_cast<float>(v));
  }
  if (!f) throw std::runtime_error("write_wav: write failed: " + path);
}

}  // namespace ncae
