#include "ncae/dsp.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace ncae {
namespace {

using std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT.
void fft_pow2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

/// DFT of a real frame; only bins 0..n/2 are returned as magnitudes.
void frame_magnitudes(const std::vector<double>& frame,
                      std::vector<double>& mags_out) {
  const std::size_t n = frame.size();
  const std::size_t bins = n / 2 + 1;
  mags_out.resize(bins);
  if (is_pow2(n)) {
    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = frame[i];
    fft_pow2(a);
    for (std::size_t b = 0; b < bins; ++b) mags_out[b] = std::abs(a[b]);
  } else {
    // fallback for non-power-of-two windows
    for (std::size_t b = 0; b < bins; ++b) {
      double re = 0.0, im = 0.0;
      const double w = -2.0 * pi * static_cast<double>(b) /
                       static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double ang = w * static_cast<double>(i);
        re += frame[i] * std::cos(ang);
        im += frame[i] * std::sin(ang);
      }
      mags_out[b] = std::hypot(re, im);
    }
  }
}

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(i) /
                                 static_cast<double>(n)));
  return w;
}

}  // namespace

std::size_t PreprocessConfig::segment_samples() const {
  return static_cast<std::size_t>(
      std::llround(segment_len_ms * sample_rate / 1000.0));
}

std::size_t PreprocessConfig::segment_hop_samples() const {
  return static_cast<std::size_t>(
      std::llround(segment_hop_ms * sample_rate / 1000.0));
}

void PreprocessConfig::validate() const {
  if (sample_rate <= 0)
    throw std::invalid_argument("preprocess: sample_rate must be > 0");
  if (window_len == 0)
    throw std::invalid_argument("preprocess: window_len must be > 0");
  if (hop_len == 0 || hop_len > window_len)
    throw std::invalid_argument("preprocess: need 0 < hop_len <= window_len");
  if (n_mels == 0) throw std::invalid_argument("preprocess: n_mels must be > 0");
  if (stack_len == 0)
    throw std::invalid_argument("preprocess: stack_len must be > 0");
  if (segment_hop_ms <= 0.0 || segment_len_ms <= 0.0)
    throw std::invalid_argument("preprocess: segment lengths must be > 0");
  if (segment_samples() < window_len)
    throw std::invalid_argument(
        "preprocess: segment must fit at least one Fourier window");
  if (log_floor <= 0.0)
    throw std::invalid_argument("preprocess: log_floor must be > 0");
}

double mel_from_hz(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double hz_from_mel(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<std::vector<double>> segment_stream(const AudioBuffer& audio,
                                                const PreprocessConfig& cfg) {
  cfg.validate();
  const std::size_t seg = cfg.segment_samples();
  const std::size_t hop = cfg.segment_hop_samples();
  std::vector<std::vector<double>> out;
  if (audio.samples.size() < seg) return out;
  const std::size_t count = 1 + (audio.samples.size() - seg) / hop;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * hop;
    out.emplace_back(audio.samples.begin() + start,
                     audio.samples.begin() + start + seg);
  }
  return out;
}

Spectrogram stft(const std::vector<double>& segment,
                 const PreprocessConfig& cfg) {
  const std::size_t w = cfg.window_len;
  const std::size_t h = cfg.hop_len;
  if (segment.size() < w)
    throw std::invalid_argument("stft: segment too short (" +
                                std::to_string(segment.size()) + " < " +
                                std::to_string(w) + ")");
  const std::size_t frames = 1 + (segment.size() - w) / h;
  const std::size_t bins = w / 2 + 1;
  const std::vector<double> window = hann_window(w);

  Spectrogram spec;
  spec.bins = bins;
  spec.frames = frames;
  spec.magnitudes.assign(bins * frames, 0.0);

  std::vector<double> frame(w);
  std::vector<double> mags;
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = segment.data() + t * h;
    for (std::size_t i = 0; i < w; ++i) frame[i] = src[i] * window[i];
    frame_magnitudes(frame, mags);
    for (std::size_t b = 0; b < bins; ++b) spec.at(b, t) = mags[b];
  }
  return spec;
}

MelFilterbank build_mel_filterbank(const PreprocessConfig& cfg) {
  if (cfg.n_mels < 2)
    throw std::invalid_argument("build_mel_filterbank: too few mel bands");
  const std::size_t bins = cfg.window_len / 2 + 1;
  const double f_min = 0.0;
  const double f_max = cfg.sample_rate / 2.0;

  MelFilterbank fb;
  fb.n_mels = cfg.n_mels;
  fb.bins = bins;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.weights.assign(cfg.n_mels * bins, 0.0);
  fb.center_hz.resize(cfg.n_mels);
  fb.row_begin.assign(cfg.n_mels, 0);
  fb.row_end.assign(cfg.n_mels, 0);

  const double mel_lo = mel_from_hz(f_min);
  const double mel_hi = mel_from_hz(f_max);
  std::vector<double> edges_hz(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges_hz.size(); ++i)
    edges_hz[i] = hz_from_mel(mel_lo + (mel_hi - mel_lo) *
                                           static_cast<double>(i) /
                                           static_cast<double>(cfg.n_mels + 1));

  const double bin_hz = static_cast<double>(cfg.sample_rate) /
                        static_cast<double>(cfg.window_len);
  for (std::size_t d = 0; d < cfg.n_mels; ++d) {
    const double left = edges_hz[d];
    const double center = edges_hz[d + 1];
    const double right = edges_hz[d + 2];
    fb.center_hz[d] = center;
    double row_max = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = bin_hz * static_cast<double>(b);
      double v = 0.0;
      if (f > left && f < right)
        v = f <= center ? (f - left) / (center - left)
                        : (right - f) / (right - center);
      fb.weights[d * bins + b] = v;
      row_max = std::max(row_max, v);
    }
    if (row_max <= 0.0)
      throw std::runtime_error(
          "build_mel_filterbank: empty filter row (window too coarse)");
    std::size_t begin = bins, end = 0;
    for (std::size_t b = 0; b < bins; ++b) {
      double& v = fb.weights[d * bins + b];
      v /= row_max;  // unit-peak triangles
      if (v > 0.0) {
        begin = std::min(begin, b);
        end = b + 1;
      }
    }
    fb.row_begin[d] = begin;
    fb.row_end[d] = end;
  }
  return fb;
}

std::vector<double> mel_spectra(const Spectrogram& spec,
                                const MelFilterbank& fb,
                                const PreprocessConfig& cfg) {
  if (spec.bins != fb.bins)
    throw std::invalid_argument("mel_spectra: spectrogram has " +
                                std::to_string(spec.bins) +
                                " bins, filterbank expects " +
                                std::to_string(fb.bins));
  const std::size_t d_count = fb.n_mels;
  const std::size_t frames = spec.frames;
  std::vector<double> out(d_count * frames, 0.0);
  for (std::size_t d = 0; d < d_count; ++d) {
    const double* row = &fb.weights[d * fb.bins];
    for (std::size_t t = 0; t < frames; ++t) {
      double e = 0.0;
      for (std::size_t b = fb.row_begin[d]; b < fb.row_end[d]; ++b) {
        const double m = spec.at(b, t);
        e += row[b] * m * m;
      }
      out[d * frames + t] = std::log(std::max(e, cfg.log_floor));
    }
  }
  if (cfg.apply_dct) {
    // type-II DCT along the band axis, all coefficients kept
    std::vector<double> dct(d_count * frames, 0.0);
    const auto dd = static_cast<double>(d_count);
    for (std::size_t k = 0; k < d_count; ++k)
      for (std::size_t t = 0; t < frames; ++t) {
        double acc = 0.0;
        for (std::size_t d = 0; d < d_count; ++d)
          acc += out[d * frames + t] *
                 std::cos(pi * (static_cast<double>(d) + 0.5) *
                          static_cast<double>(k) / dd);
        dct[k * frames + t] = acc;
      }
    out = std::move(dct);
  }
  return out;
}

MfccVector time_average(const std::vector<double>& mel, std::size_t n_mels,
                        std::size_t frames) {
  if (frames == 0) throw std::invalid_argument("time_average: zero frames");
  if (mel.size() != n_mels * frames)
    throw std::invalid_argument("time_average: size mismatch");
  MfccVector v;
  v.coeffs.resize(n_mels);
  for (std::size_t d = 0; d < n_mels; ++d) {
    double acc = 0.0;
    for (std::size_t t = 0; t < frames; ++t) acc += mel[d * frames + t];
    v.coeffs[d] = acc / static_cast<double>(frames);
  }
  return v;
}

std::vector<MfccSequence> stack_sequences(const std::vector<MfccVector>& vecs,
                                          const PreprocessConfig& cfg,
                                          StackMode mode,
                                          const std::string& source_id) {
  const std::size_t s_len = cfg.stack_len;
  const std::size_t d_len = cfg.n_mels;
  for (const auto& v : vecs)
    if (v.coeffs.size() != d_len)
      throw std::invalid_argument("stack_sequences: vector length mismatch");

  std::vector<MfccSequence> out;
  if (vecs.size() < s_len) return out;

  const double hop_s = cfg.segment_hop_ms / 1000.0;
  auto make_sequence = [&](std::size_t first) {
    MfccSequence seq;
    seq.rows = s_len;
    seq.cols = d_len;
    seq.data.resize(s_len * d_len);
    for (std::size_t s = 0; s < s_len; ++s)
      for (std::size_t d = 0; d < d_len; ++d)
        seq.at(s, d) = vecs[first + s].coeffs[d];
    seq.source_id = source_id;
    seq.start_time = static_cast<double>(first) * hop_s;
    return seq;
  };

  if (mode == StackMode::kTumbling) {
    const std::size_t count = vecs.size() / s_len;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(make_sequence(i * s_len));
  } else {
    const std::size_t count = vecs.size() - s_len + 1;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(make_sequence(i));
  }
  return out;
}

std::vector<MfccVector> mfcc_vectors_from_audio(const AudioBuffer& audio,
                                                const PreprocessConfig& cfg) {
  cfg.validate();
  if (audio.sample_rate != cfg.sample_rate)
    throw std::invalid_argument(
        "preprocess: audio sample rate " + std::to_string(audio.sample_rate) +
        " does not match configured " + std::to_string(cfg.sample_rate) +
        " (resampling is not supported)");
  const MelFilterbank fb = build_mel_filterbank(cfg);
  std::vector<MfccVector> vectors;
  for (const auto& segment : segment_stream(audio, cfg)) {
    const Spectrogram spec = stft(segment, cfg);
    const std::vector<double> mel = mel_spectra(spec, fb, cfg);
    vectors.push_back(time_average(mel, cfg.n_mels, spec.frames));
  }
  return vectors;
}

std::vector<MfccSequence> sequences_from_audio(const AudioBuffer& audio,
                                               const PreprocessConfig& cfg,
                                               StackMode mode,
                                               const std::string& source_id) {
  return stack_sequences(mfcc_vectors_from_audio(audio, cfg), cfg, mode,
                         source_id);
}

}  // namespace ncae
