#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ncae {

/// Mono sample stream, amplitudes nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

enum class WavFormat { kPcm16, kFloat32 };

/// Reads a mono PCM16 or IEEE float32 WAV file. PCM16 samples are scaled
/// by 1/32768.
AudioBuffer read_wav(const std::string& path);

void write_wav(const std::string& path, const AudioBuffer& audio,
               WavFormat format = WavFormat::kFloat32);

}  // namespace ncae
