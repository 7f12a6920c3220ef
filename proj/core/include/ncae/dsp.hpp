#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ncae/audio.hpp"

namespace ncae {

/// Parameters of the audio-to-feature front end. Defaults follow the
/// project's reference configuration: 44.1 kHz input, 500 ms analysis
/// segments every 250 ms, 2048/512 STFT, 128 mel bands, stacks of 30.
struct PreprocessConfig {
  int sample_rate = 44100;
  std::size_t window_len = 2048;  // Fourier window W
  std::size_t hop_len = 512;      // Fourier hop H
  std::size_t n_mels = 128;       // feature dimension D
  std::size_t stack_len = 30;     // vectors per sequence S
  double segment_len_ms = 500.0;
  double segment_hop_ms = 250.0;
  bool apply_dct = false;  // optional DCT-II over the band axis
  double log_floor = 1e-10;

  std::size_t segment_samples() const;
  std::size_t segment_hop_samples() const;
  void validate() const;
};

/// Magnitude spectrogram, bins x frames with bins = W/2+1.
struct Spectrogram {
  std::vector<double> magnitudes;  // row-major, bins x frames
  std::size_t bins = 0;
  std::size_t frames = 0;

  double& at(std::size_t bin, std::size_t frame) {
    return magnitudes[bin * frames + frame];
  }
  double at(std::size_t bin, std::size_t frame) const {
    return magnitudes[bin * frames + frame];
  }
};

/// Triangular mel filterbank, D x bins, unit-peak rows. Centers are equally
/// spaced on the HTK mel scale m(f) = 2595*log10(1 + f/700) between f_min
/// and f_max.
struct MelFilterbank {
  std::vector<double> weights;  // row-major, D x bins
  std::size_t n_mels = 0;
  std::size_t bins = 0;
  double f_min = 0.0;
  double f_max = 0.0;
  std::vector<double> center_hz;  // D filter centers
  // per-row [begin, end) bin range of nonzero support, for fast products
  std::vector<std::size_t> row_begin;
  std::vector<std::size_t> row_end;

  double at(std::size_t mel, std::size_t bin) const {
    return weights[mel * bins + bin];
  }
};

struct MfccVector {
  std::vector<double> coeffs;  // length D
};

/// S x D block of stacked time-averaged MFCC vectors; the network's unit of
/// input and output.
struct MfccSequence {
  std::vector<double> data;  // row-major, S x D
  std::size_t rows = 0;      // S
  std::size_t cols = 0;      // D
  std::string source_id;
  double start_time = 0.0;

  double& at(std::size_t s, std::size_t d) { return data[s * cols + d]; }
  double at(std::size_t s, std::size_t d) const { return data[s * cols + d]; }
};

double mel_from_hz(double hz);
double hz_from_mel(double mel);

/// Splits audio into fixed-length analysis segments (500 ms every 250 ms at
/// the defaults). Trailing audio that does not fill a segment is dropped.
/// Audio shorter than one segment yields an empty list.
std::vector<std::vector<double>> segment_stream(const AudioBuffer& audio,
                                                const PreprocessConfig& cfg);

/// Hann-windowed magnitude STFT with non-centered framing:
/// frames = 1 + floor((len - W) / H).
Spectrogram stft(const std::vector<double>& segment,
                 const PreprocessConfig& cfg);

MelFilterbank build_mel_filterbank(const PreprocessConfig& cfg);

/// Log-compressed mel energies, D x frames: log(max(fb * mag^2, log_floor)),
/// optionally followed by a DCT-II along the band axis.
std::vector<double> mel_spectra(const Spectrogram& spec,
                                const MelFilterbank& fb,
                                const PreprocessConfig& cfg);

/// Arithmetic mean over the frame axis of a D x frames matrix.
MfccVector time_average(const std::vector<double>& mel, std::size_t n_mels,
                        std::size_t frames);

enum class StackMode { kTumbling, kSliding };

/// Groups consecutive MFCC vectors into S x D sequences. Tumbling mode emits
/// non-overlapping blocks (dataset construction); sliding mode emits one
/// sequence per new vector once S are available (streaming detection).
std::vector<MfccSequence> stack_sequences(const std::vector<MfccVector>& vecs,
                                          const PreprocessConfig& cfg,
                                          StackMode mode,
                                          const std::string& source_id = "");

/// Full front end: segment -> STFT -> mel -> time-average -> stack.
std::vector<MfccSequence> sequences_from_audio(const AudioBuffer& audio,
                                               const PreprocessConfig& cfg,
                                               StackMode mode,
                                               const std::string& source_id);

/// Per-segment MFCC vectors only (no stacking); used by streaming detection.
std::vector<MfccVector> mfcc_vectors_from_audio(const AudioBuffer& audio,
                                                const PreprocessConfig& cfg);

}  // namespace ncae
