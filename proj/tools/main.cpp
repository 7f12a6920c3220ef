// Command-line front end for the anomaly-detection pipeline. Subcommands:
//   synth       generate the labeled synthetic driving-noise corpus
//   preprocess  audio -> cached MFCC sequence bundle
//   train       fit a model on the normal training split
//   sweep       grid search over learning rate x kernel size
//   montecarlo  repeated train/eval runs, AUROC spread + timings
//   profile     parameter / FLOPs tables and cost ratios
//   detect      streaming per-window verdicts over a WAV or stdin
//   errormap    reconstruction dump + log-scaled pixel error image
//
// Configuration is a key=value text file plus `--key value` overrides.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
// failure.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "ncae/dataset.hpp"
#include "ncae/dsp.hpp"
#include "ncae/eval.hpp"
#include "ncae/model.hpp"
#include "ncae/profiler.hpp"
#include "ncae/training.hpp"

namespace fs = std::filesystem;
using namespace ncae;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // paths
  std::string data_dir = "data";
  std::string out_dir = ".";
  std::string sequences = "sequences.bin";
  std::string model = "model.bin";
  std::string wav;

  PreprocessConfig pp;
  std::string stack_mode = "tumbling";

  // dataset split
  double train_fraction = 0.8;
  std::uint64_t split_seed = 1234;

  TrainConfig train;
  std::string model_kind = "ncae";
  std::size_t latent_dim = 128;

  SynthConfig synth;

  // monte carlo / sweep / errormap / detect
  std::size_t runs = 5;
  std::string grid_learning_rates = "5e-3,1e-3,5e-4,1e-4,5e-5,1e-5";
  std::string grid_kernels = "3,5,7";
  std::size_t index = 0;
  bool realtime = false;
};

std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long n = std::stoll(v, &pos);
    if (pos != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw UsageError("config: " + key + " expects a non-negative integer, got '" +
                     v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw UsageError("config: " + key + " expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw UsageError("config: " + key + " expects a boolean, got '" + v + "'");
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& v) {
  // paths
  if (key == "data_dir") cfg.data_dir = v;
  else if (key == "out_dir") cfg.out_dir = v;
  else if (key == "sequences") cfg.sequences = v;
  else if (key == "model") cfg.model = v;
  else if (key == "wav") cfg.wav = v;
  // preprocessing
  else if (key == "sample_rate") cfg.pp.sample_rate = static_cast<int>(parse_size(key, v));
  else if (key == "window_len") cfg.pp.window_len = parse_size(key, v);
  else if (key == "hop_len") cfg.pp.hop_len = parse_size(key, v);
  else if (key == "n_mels") cfg.pp.n_mels = parse_size(key, v);
  else if (key == "stack_len") cfg.pp.stack_len = parse_size(key, v);
  else if (key == "segment_len_ms") cfg.pp.segment_len_ms = parse_real(key, v);
  else if (key == "segment_hop_ms") cfg.pp.segment_hop_ms = parse_real(key, v);
  else if (key == "apply_dct") cfg.pp.apply_dct = parse_bool(key, v);
  else if (key == "log_floor") cfg.pp.log_floor = parse_real(key, v);
  else if (key == "stack_mode") cfg.stack_mode = v;
  // split
  else if (key == "train_fraction") cfg.train_fraction = parse_real(key, v);
  else if (key == "split_seed") cfg.split_seed = parse_size(key, v);
  // training
  else if (key == "learning_rate") cfg.train.learning_rate = parse_real(key, v);
  else if (key == "kernel") cfg.train.kernel = parse_size(key, v);
  else if (key == "batch_size") cfg.train.batch_size = parse_size(key, v);
  else if (key == "max_epochs") cfg.train.max_epochs = parse_size(key, v);
  else if (key == "patience") cfg.train.patience = parse_size(key, v);
  else if (key == "min_delta") cfg.train.min_delta = parse_real(key, v);
  else if (key == "seed") cfg.train.seed = parse_size(key, v);
  else if (key == "model_kind") cfg.model_kind = v;
  else if (key == "latent_dim") cfg.latent_dim = parse_size(key, v);
  // synthesis
  else if (key == "synth_seed") cfg.synth.seed = parse_size(key, v);
  else if (key == "dry_events") cfg.synth.dry_events = parse_size(key, v);
  else if (key == "wet_events") cfg.synth.wet_events = parse_size(key, v);
  else if (key == "event_min_s") cfg.synth.event_min_s = parse_real(key, v);
  else if (key == "event_max_s") cfg.synth.event_max_s = parse_real(key, v);
  else if (key == "silence_pad_s") cfg.synth.silence_pad_s = parse_real(key, v);
  else if (key == "noise_level") cfg.synth.noise_level = parse_real(key, v);
  else if (key == "hum_level") cfg.synth.hum_level = parse_real(key, v);
  else if (key == "wet_level") cfg.synth.wet_level = parse_real(key, v);
  else if (key == "lowpass_hz") cfg.synth.lowpass_hz = parse_real(key, v);
  else if (key == "highpass_hz") cfg.synth.highpass_hz = parse_real(key, v);
  else if (key == "level_min") cfg.synth.level_min = parse_real(key, v);
  else if (key == "level_max") cfg.synth.level_max = parse_real(key, v);
  else if (key == "variation") cfg.synth.variation = parse_real(key, v);
  else if (key == "am_depth") cfg.synth.am_depth = parse_real(key, v);
  // evaluation / sweep / detect / errormap
  else if (key == "runs") cfg.runs = parse_size(key, v);
  else if (key == "grid_learning_rates") cfg.grid_learning_rates = v;
  else if (key == "grid_kernels") cfg.grid_kernels = v;
  else if (key == "index") cfg.index = parse_size(key, v);
  else if (key == "realtime") cfg.realtime = parse_bool(key, v);
  else
    throw UsageError("config: unknown key '" + key + "'");
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config: " + path + ":" + std::to_string(lineno) +
                       ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto ke = key.find_last_not_of(" \t");
    key = key.substr(0, ke + 1);
    const auto vb = value.find_first_not_of(" \t");
    value = vb == std::string::npos ? "" : value.substr(vb);
    apply_key(cfg, key, value);
  }
}

RunConfig parse_args(int argc, char** argv, int first) {
  RunConfig cfg;
  // config file first so command-line keys override it
  for (int i = first; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0) {
      if (i + 1 >= argc) throw UsageError("--config needs a path");
      load_config_file(cfg, argv[i + 1]);
    }
  }
  for (int i = first; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0)
      throw UsageError("unexpected argument '" + arg + "'");
    if (i + 1 >= argc) throw UsageError(arg + " needs a value");
    const std::string value = argv[++i];
    if (arg == "--config") continue;  // handled above
    apply_key(cfg, arg.substr(2), value);
  }
  cfg.pp.validate();
  cfg.synth.validate();
  cfg.train.validate();
  if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0)
    throw UsageError("config: train_fraction must be in (0, 1)");
  if (cfg.model_kind != "ncae" && cfg.model_kind != "bottleneck")
    throw UsageError("config: model_kind must be ncae or bottleneck");
  if (cfg.stack_mode != "tumbling" && cfg.stack_mode != "sliding")
    throw UsageError("config: stack_mode must be tumbling or sliding");
  return cfg;
}

std::vector<double> parse_real_list(const std::string& key,
                                    const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, item));
  if (out.empty()) throw UsageError("config: " + key + " is empty");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& key,
                                         const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, item));
  if (out.empty()) throw UsageError("config: " + key + " is empty");
  return out;
}

std::unique_ptr<ReconstructionModel> make_model(const RunConfig& cfg,
                                                std::size_t seq_len,
                                                std::size_t feat_dim,
                                                std::size_t kernel) {
  if (cfg.model_kind == "bottleneck")
    return std::make_unique<BottleneckAeModel>(seq_len, feat_dim, kernel,
                                               cfg.latent_dim);
  return std::make_unique<NcaeModel>(seq_len, feat_dim, kernel);
}

std::vector<SequenceRecord> load_bundle(const RunConfig& cfg) {
  auto records = read_sequence_bundle(cfg.sequences);
  if (records.empty())
    throw std::runtime_error("sequence bundle " + cfg.sequences + " is empty");
  return records;
}

double test_auroc(const ReconstructionModel& model, const DatasetSplit& split) {
  std::vector<ScoredSequence> scored;
  for (const auto& s : split.test_normal)
    scored.push_back({score_sequence(model, s), Label::kNormal, s.source_id});
  for (const auto& s : split.test_abnormal)
    scored.push_back({score_sequence(model, s), Label::kAbnormal, s.source_id});
  return auroc(scored);
}

// ---------------------------------------------------------------- synth

int cmd_synth(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const auto files = synth_generate(cfg.synth, cfg.out_dir);
  std::size_t dry = 0;
  for (const auto& f : files)
    if (f.condition == Condition::kDry) ++dry;
  std::cout << "wrote " << files.size() << " files (" << dry << " dry, "
            << files.size() - dry << " wet) to " << cfg.out_dir << "\n";
  return 0;
}

// ----------------------------------------------------------- preprocess

int cmd_preprocess(const RunConfig& cfg) {
  const auto manifest = read_manifest_csv(
      (fs::path(cfg.data_dir) / "manifest.csv").string());
  const StackMode mode = cfg.stack_mode == "sliding" ? StackMode::kSliding
                                                     : StackMode::kTumbling;
  std::vector<SequenceRecord> records;
  for (const auto& entry : manifest) {
    const std::string path = (fs::path(cfg.data_dir) / entry.filename).string();
    const AudioBuffer audio = read_wav(path);
    if (audio.sample_rate != cfg.pp.sample_rate)
      throw std::runtime_error(path + ": sample rate " +
                               std::to_string(audio.sample_rate) +
                               " does not match configured " +
                               std::to_string(cfg.pp.sample_rate));
    const double thr = default_event_threshold(audio);
    auto events = extract_events(audio, thr, /*min_gap_s=*/0.5,
                                 /*min_len_s=*/1.0, entry.filename);
    for (auto& ev : events) ev.label = entry.condition;
    auto recs = records_from_events(events, cfg.pp, mode);
    records.insert(records.end(), recs.begin(), recs.end());
  }
  if (records.empty())
    throw std::runtime_error("preprocess: no sequences extracted from " +
                             cfg.data_dir);
  if (const auto parent = fs::path(cfg.sequences).parent_path();
      !parent.empty())
    fs::create_directories(parent);
  write_sequence_bundle(cfg.sequences, records);
  std::size_t dry = 0;
  for (const auto& r : records)
    if (r.condition == Condition::kDry) ++dry;
  std::cout << "cached " << records.size() << " sequences (" << dry
            << " dry, " << records.size() - dry << " wet) to "
            << cfg.sequences << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& cfg) {
  const auto records = load_bundle(cfg);
  const DatasetSplit split =
      split_dataset(records, cfg.train_fraction, cfg.split_seed);
  const auto& first = split.train.front();
  auto model = make_model(cfg, first.rows, first.cols, cfg.train.kernel);
  const TrainRecord record = train(*model, split.train, cfg.train);
  if (const auto parent = fs::path(cfg.model).parent_path(); !parent.empty())
    fs::create_directories(parent);
  save_model(cfg.model, *model);
  write_loss_csv(cfg.model + ".loss.csv", record);
  std::cout << "trained " << model->kind() << " (k=" << cfg.train.kernel
            << ", lr=" << cfg.train.learning_rate << ") for "
            << record.final_epoch << " epochs, final loss "
            << record.epoch_loss.back() << ", theta "
            << model->threshold.theta << "\n";
  if (!split.test_normal.empty() && !split.test_abnormal.empty())
    std::cout << "test AUROC " << test_auroc(*model, split) << "\n";
  std::cout << "model written to " << cfg.model << "\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const RunConfig& cfg) {
  const auto records = load_bundle(cfg);
  const DatasetSplit split =
      split_dataset(records, cfg.train_fraction, cfg.split_seed);
  const auto lrs = parse_real_list("grid_learning_rates", cfg.grid_learning_rates);
  const auto kernels = parse_size_list("grid_kernels", cfg.grid_kernels);
  const auto& first = split.train.front();
  const GridResult result = grid_search(
      split.train, lrs, kernels, cfg.train,
      [&](std::size_t k) { return make_model(cfg, first.rows, first.cols, k); },
      [&](ReconstructionModel& m) { return test_auroc(m, split); });
  fs::create_directories(cfg.out_dir);
  const std::string csv = (fs::path(cfg.out_dir) / "sweep.csv").string();
  write_grid_csv(csv, result);
  const GridCell& best = result.cells[result.best_index];
  std::cout << "grid written to " << csv << "\n";
  std::cout << "best cell: kernel=" << best.kernel
            << " learning_rate=" << best.learning_rate << " auroc="
            << *best.auroc << "\n";
  return 0;
}

// ----------------------------------------------------------- montecarlo

int cmd_montecarlo(const RunConfig& cfg) {
  const auto records = load_bundle(cfg);
  const DatasetSplit split =
      split_dataset(records, cfg.train_fraction, cfg.split_seed);
  const auto& first = split.train.front();
  const std::size_t n_test =
      split.test_normal.size() + split.test_abnormal.size();
  const auto run_one = [&](std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    auto model = make_model(cfg, first.rows, first.cols, tc.kernel);
    const TrainRecord rec = train(*model, split.train, tc);
    const auto t0 = std::chrono::steady_clock::now();
    const double a = test_auroc(*model, split);
    const double infer =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    MonteCarloRun run;
    run.auroc = a;
    run.train_seconds = rec.epoch_seconds.back();
    run.inference_seconds_per_seq = infer / static_cast<double>(n_test);
    return run;
  };
  const MonteCarloReport report =
      monte_carlo(cfg.runs, cfg.train.seed, run_one);
  fs::create_directories(cfg.out_dir);
  const std::string csv = (fs::path(cfg.out_dir) / "montecarlo.csv").string();
  write_monte_carlo_csv(csv, report);
  std::cout << "runs " << report.runs << ": AUROC min " << report.auroc_min
            << " max " << report.auroc_max << " mean " << report.auroc_mean
            << " sd " << report.auroc_sd << "\n"
            << "mean train time " << report.mean_train_seconds
            << " s, mean inference " << report.mean_inference_seconds
            << " s/sequence\n"
            << "report written to " << csv << "\n";
  return 0;
}

// -------------------------------------------------------------- profile

int cmd_profile(const RunConfig& cfg) {
  if (cfg.train.kernel % 2 == 0) throw UsageError("kernel must be odd");
  fs::create_directories(cfg.out_dir);

  std::vector<std::pair<std::size_t, CostReport>> rows;
  for (std::size_t k : {std::size_t{3}, std::size_t{5}, std::size_t{7}}) {
    const NcaeModel model(cfg.pp.stack_len, cfg.pp.n_mels, k);
    rows.emplace_back(k, flops(model));
  }
  const PublishedCosts published = PublishedCosts::reference();

  std::cout << "model cost (S=" << cfg.pp.stack_len << ", D=" << cfg.pp.n_mels
            << ")\n";
  std::printf("%-10s %8s %12s %12s\n", "model", "kernel", "params", "MFLOPs");
  for (const auto& e : published.entries)
    std::printf("%-10s %8d %12zu %12.3f\n", e.name.c_str(), 3, e.params,
                e.mflops);
  for (const auto& [k, report] : rows)
    std::printf("%-10s %8zu %12zu %12.3f\n", "NCAE", k, report.params,
                report.mflops);

  const CostReport* selected = nullptr;
  for (const auto& [k, report] : rows)
    if (k == cfg.train.kernel) selected = &report;
  std::unique_ptr<NcaeModel> extra;
  CostReport extra_report;
  if (!selected) {
    extra = std::make_unique<NcaeModel>(cfg.pp.stack_len, cfg.pp.n_mels,
                                        cfg.train.kernel);
    extra_report = flops(*extra);
    selected = &extra_report;
  }
  const auto ratios = cost_ratios(*selected, published);
  std::cout << "\nNCAE (k=" << cfg.train.kernel
            << ") cost as a percentage of each reference model\n";
  std::printf("%-10s %12s %12s\n", "versus", "params %", "MFLOPs %");
  for (const auto& r : ratios)
    std::printf("%-10s %12.3f %12.3f\n", r.versus.c_str(), r.param_pct,
                r.mflops_pct);

  std::ofstream costs((fs::path(cfg.out_dir) / "costs.csv").string());
  costs << "model,kernel,params,flops,mflops\n";
  for (const auto& e : published.entries)
    costs << e.name << ",3," << e.params << ",," << e.mflops << "\n";
  costs << std::setprecision(10);
  for (const auto& [k, report] : rows)
    costs << "NCAE," << k << "," << report.params << "," << report.flops
          << "," << report.mflops << "\n";

  std::ofstream rcsv((fs::path(cfg.out_dir) / "ratios.csv").string());
  rcsv << "versus,param_pct,mflops_pct\n" << std::setprecision(10);
  for (const auto& r : ratios)
    rcsv << r.versus << "," << r.param_pct << "," << r.mflops_pct << "\n";
  std::cout << "\nCSV written to " << cfg.out_dir << "/costs.csv and "
            << cfg.out_dir << "/ratios.csv\n";
  return 0;
}

// --------------------------------------------------------------- detect

/// Bounded single-producer single-consumer handoff between the DSP stage
/// and the model stage.
class VectorQueue {
 public:
  explicit VectorQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(MfccVector v) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(std::move(v));
    not_empty_.notify_one();
  }

  bool pop(MfccVector& out) {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return false;
    out = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<MfccVector> items_;
  std::size_t capacity_;
  bool closed_ = false;
};

/// Pull-based sample source so stdin streams are never buffered whole.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  // Appends up to n samples; returns how many were produced (0 at EOF).
  virtual std::size_t pull(std::vector<double>& out, std::size_t n) = 0;
};

class BufferSource : public SampleSource {
 public:
  explicit BufferSource(std::vector<double> samples)
      : samples_(std::move(samples)) {}
  std::size_t pull(std::vector<double>& out, std::size_t n) override {
    const std::size_t take = std::min(n, samples_.size() - pos_);
    out.insert(out.end(), samples_.begin() + static_cast<std::ptrdiff_t>(pos_),
               samples_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
    pos_ += take;
    return take;
  }

 private:
  std::vector<double> samples_;
  std::size_t pos_ = 0;
};

/// Raw 32-bit little-endian float samples from standard input.
class StdinSource : public SampleSource {
 public:
  std::size_t pull(std::vector<double>& out, std::size_t n) override {
    std::vector<float> buf(n);
    std::cin.read(reinterpret_cast<char*>(buf.data()),
                  static_cast<std::streamsize>(n * sizeof(float)));
    const std::size_t got =
        static_cast<std::size_t>(std::cin.gcount()) / sizeof(float);
    for (std::size_t i = 0; i < got; ++i)
      out.push_back(static_cast<double>(buf[i]));
    return got;
  }
};

int cmd_detect(const RunConfig& cfg) {
  const auto model = load_model(cfg.model);
  if (!model->threshold.valid)
    throw std::runtime_error("model " + cfg.model +
                             " has no stored decision threshold");
  if (model->feat_dim() != cfg.pp.n_mels)
    throw UsageError("config: n_mels " + std::to_string(cfg.pp.n_mels) +
                     " does not match model feature dimension " +
                     std::to_string(model->feat_dim()));
  const std::size_t s_len = model->seq_len();
  const std::size_t seg = cfg.pp.segment_samples();
  const std::size_t hop = cfg.pp.segment_hop_samples();
  const double hop_s = static_cast<double>(hop) / cfg.pp.sample_rate;

  std::unique_ptr<SampleSource> source;
  if (cfg.wav.empty()) throw UsageError("detect needs --wav PATH (or '-')");
  if (cfg.wav == "-") {
    source = std::make_unique<StdinSource>();
  } else {
    AudioBuffer audio = read_wav(cfg.wav);
    if (audio.sample_rate != cfg.pp.sample_rate)
      throw std::runtime_error(cfg.wav + ": sample rate mismatch");
    source = std::make_unique<BufferSource>(std::move(audio.samples));
  }

  const MelFilterbank fb = build_mel_filterbank(cfg.pp);
  VectorQueue queue(8);
  std::atomic<bool> producer_failed{false};

  std::thread producer([&] {
    try {
      std::vector<double> window;  // rolling buffer, at most seg samples
      window.reserve(seg);
      const auto start = std::chrono::steady_clock::now();
      std::size_t emitted = 0;
      while (true) {
        const std::size_t need = seg - window.size();
        if (source->pull(window, need) < need) break;  // stream exhausted
        const Spectrogram spec = stft(window, cfg.pp);
        const auto mel = mel_spectra(spec, fb, cfg.pp);
        queue.push(time_average(mel, cfg.pp.n_mels, spec.frames));
        ++emitted;
        window.erase(window.begin(),
                     window.begin() + static_cast<std::ptrdiff_t>(hop));
        if (cfg.realtime)
          std::this_thread::sleep_until(
              start + std::chrono::duration<double>(
                          static_cast<double>(emitted) * hop_s));
      }
    } catch (...) {
      producer_failed = true;
    }
    queue.close();
  });

  const Threshold theta{model->threshold.theta, model->threshold.mu,
                        model->threshold.sigma};
  std::cout << "timestamp,score,theta,verdict" << std::endl;
  std::deque<MfccVector> recent;
  double window_end_s = static_cast<double>(seg) / cfg.pp.sample_rate;
  MfccVector v;
  while (queue.pop(v)) {
    recent.push_back(std::move(v));
    if (recent.size() > s_len) recent.pop_front();
    if (recent.size() == s_len) {
      MfccSequence seq;
      seq.rows = s_len;
      seq.cols = cfg.pp.n_mels;
      seq.data.reserve(s_len * cfg.pp.n_mels);
      for (const auto& r : recent)
        seq.data.insert(seq.data.end(), r.coeffs.begin(), r.coeffs.end());
      const double score = score_sequence(*model, seq);
      const Label verdict = classify(score, theta);
      std::cout << window_end_s << ',' << score << ',' << theta.theta << ','
                << (verdict == Label::kAbnormal ? "abnormal" : "normal")
                << std::endl;
    }
    window_end_s += hop_s;
  }
  producer.join();
  if (producer_failed)
    throw std::runtime_error("detect: audio producer failed");
  return 0;
}

// ------------------------------------------------------------- errormap

int cmd_errormap(const RunConfig& cfg) {
  const auto model = load_model(cfg.model);
  const auto records = load_bundle(cfg);
  if (cfg.index >= records.size())
    throw UsageError("config: index " + std::to_string(cfg.index) +
                     " out of range (bundle has " +
                     std::to_string(records.size()) + " sequences)");
  const MfccSequence& raw = records[cfg.index].seq;
  if (raw.rows != model->seq_len() || raw.cols != model->feat_dim())
    throw std::runtime_error("sequence shape does not match the model");

  const Tensor xn = normalize(batch_from_sequence(raw), model->norm_stats);
  const Tensor xhat = model->reconstruct(xn);
  MfccSequence input = raw, recon = raw;
  input.data.assign(xn.data.begin(), xn.data.end());
  recon.data.assign(xhat.data.begin(), xhat.data.end());
  const auto errmap = error_map(input, recon);

  fs::create_directories(cfg.out_dir);
  const std::string csv =
      (fs::path(cfg.out_dir) / "reconstruction.csv").string();
  const std::string pgm = (fs::path(cfg.out_dir) / "errormap.pgm").string();
  write_matrix_csv(csv, recon.data, recon.rows, recon.cols);
  write_pgm(pgm, errmap, raw.rows, raw.cols);

  double mean_log_err = 0.0;
  for (double e : errmap) mean_log_err += e;
  mean_log_err /= static_cast<double>(errmap.size());
  std::cout << "sequence " << cfg.index << " ("
            << condition_name(records[cfg.index].condition)
            << "): mean log10 squared error " << mean_log_err << "\n"
            << "wrote " << csv << " and " << pgm << "\n";
  return 0;
}

int usage(std::ostream& os) {
  os << "usage: ncae <command> [--config FILE] [--key value ...]\n"
        "commands:\n"
        "  synth        generate the synthetic corpus into out_dir\n"
        "  preprocess   data_dir WAVs + manifest -> sequence bundle\n"
        "  train        fit a model, write model file + loss CSV\n"
        "  sweep        learning-rate x kernel grid search -> sweep.csv\n"
        "  montecarlo   repeated train/eval runs -> montecarlo.csv\n"
        "  profile      parameter/FLOPs tables -> stdout + CSV\n"
        "  detect       stream verdicts over --wav (or '-' for stdin)\n"
        "  errormap     reconstruction CSV + log-error PGM for one sequence\n";
  return os.rdbuf() == std::cout.rdbuf() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage(std::cerr);
  const std::string cmd = argv[1];
  if (cmd == "help" || cmd == "--help" || cmd == "-h") return usage(std::cout);
  try {
    const RunConfig cfg = parse_args(argc, argv, 2);
    if (cmd == "synth") return cmd_synth(cfg);
    if (cmd == "preprocess") return cmd_preprocess(cfg);
    if (cmd == "train") return cmd_train(cfg);
    if (cmd == "sweep") return cmd_sweep(cfg);
    if (cmd == "montecarlo") return cmd_montecarlo(cfg);
    if (cmd == "profile") return cmd_profile(cfg);
    if (cmd == "detect") return cmd_detect(cfg);
    if (cmd == "errormap") return cmd_errormap(cfg);
    throw UsageError("unknown command '" + cmd + "'");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
