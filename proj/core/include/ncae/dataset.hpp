#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncae/audio.hpp"
#include "ncae/dsp.hpp"
#include "ncae/rng.hpp"

namespace ncae {

/// Road condition: dry driving noise is the normal class, wet the abnormal
/// one.
enum class Condition { kDry, kWet };

const char* condition_name(Condition c);
Condition condition_from_name(const std::string& name);

/// Contiguous region of driving noise found by envelope thresholding.
struct DrivingEvent {
  AudioBuffer segment;
  double start_s = 0.0;
  double end_s = 0.0;
  Condition label = Condition::kDry;
  std::string source_id;
};

/// One cached MFCC sequence with its class label. Sequences keep the
/// source event id so splits can stay disjoint at the event level.
struct SequenceRecord {
  MfccSequence seq;
  Condition condition = Condition::kDry;
};

struct DatasetSplit {
  std::vector<MfccSequence> train;          // normal (dry) only
  std::vector<MfccSequence> test_normal;
  std::vector<MfccSequence> test_abnormal;
};

/// Short-window RMS envelope of the signal; window_s seconds per block.
std::vector<double> rms_envelope(const AudioBuffer& audio, double window_s);

/// Default extraction threshold: a fraction of the 95th percentile of the
/// file's RMS envelope, so extraction needs no per-file tuning.
double default_event_threshold(const AudioBuffer& audio,
                               double window_s = 0.05, double rel = 0.25);

/// Contiguous regions where the 50 ms RMS envelope exceeds the threshold.
/// Regions closer than min_gap_s are merged; regions shorter than min_len_s
/// are dropped.
std::vector<DrivingEvent> extract_events(const AudioBuffer& audio,
                                         double threshold, double min_gap_s,
                                         double min_len_s,
                                         const std::string& source_id = "",
                                         double window_s = 0.05);

/// Runs the audio front end over each event (tumbling stacking by default).
std::vector<SequenceRecord> records_from_events(
    const std::vector<DrivingEvent>& events, const PreprocessConfig& cfg,
    StackMode mode = StackMode::kTumbling);

/// Event-level 80/20 split: dry events are shuffled with the seed, the
/// first floor(fraction*n) go to train, the rest to test_normal; every wet
/// event's sequences go to test_abnormal. No event contributes to both
/// sides.
DatasetSplit split_dataset(const std::vector<SequenceRecord>& records,
                           double fraction, std::uint64_t seed);

/// Synthetic corpus standing in for real roadside recordings: dry events
/// are low-frequency-weighted noise with an engine-like harmonic hum and a
/// pass-by amplitude envelope; wet events add a broadband high-frequency
/// component.
struct SynthConfig {
  std::uint64_t seed = 7;
  int sample_rate = 44100;
  std::size_t dry_events = 38;
  std::size_t wet_events = 27;
  double event_min_s = 20.0;
  double event_max_s = 30.0;
  double silence_pad_s = 0.0;
  double noise_level = 0.6;   // low-frequency noise bed
  double hum_level = 0.25;    // harmonic hum relative level
  double wet_level = 0.5;     // high-frequency component relative level
  double lowpass_hz = 1500.0;
  double highpass_hz = 4000.0;
  // Real recordings differ between events (vehicle distance, speed,
  // engine) and within an event (approach/recede). Without this spread
  // every dry event is statistically interchangeable, training scores
  // collapse to a point, and the mean + 1.5 sigma threshold cannot cover
  // unseen material.
  double level_min = 0.5;   // per-event peak target range
  double level_max = 0.8;
  double variation = 1.0;   // 0..1 scale of per-event character jitter
  double am_depth = 0.25;   // slow within-event amplitude modulation depth

  void validate() const;
};

/// Deterministic synthesis of one event (without silence padding).
AudioBuffer synth_event(const SynthConfig& cfg, Condition condition,
                        double duration_s, Rng& rng);

struct SynthFileInfo {
  std::string filename;
  Condition condition = Condition::kDry;
  double start_s = 0.0;
  double end_s = 0.0;
  double duration_s = 0.0;
};

/// Writes one WAV per event plus a manifest CSV
/// (file,label,start,end,duration) into out_dir.
std::vector<SynthFileInfo> synth_generate(const SynthConfig& cfg,
                                          const std::string& out_dir);

std::vector<SynthFileInfo> read_manifest_csv(const std::string& path);

/// Binary cache of labeled MFCC sequences (magic, version, dims,
/// little-endian 64-bit floats).
void write_sequence_bundle(const std::string& path,
                           const std::vector<SequenceRecord>& records);
std::vector<SequenceRecord> read_sequence_bundle(const std::string& path);

/// Debug dump: one CSV row per MFCC vector
/// (source_id,label,row,coeff_0..coeff_{D-1}).
void write_sequences_csv(const std::string& path,
                         const std::vector<SequenceRecord>& records);

}  // namespace ncae
