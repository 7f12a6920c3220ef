// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. The end-to-end criteria build a synthetic corpus in a
// scratch directory and exercise the same code paths as the CLI.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "ncae/dataset.hpp"
#include "ncae/eval.hpp"
#include "ncae/model.hpp"
#include "ncae/profiler.hpp"
#include "ncae/training.hpp"

namespace fs = std::filesystem;
using namespace ncae;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail = "") {
  std::cout << "criterion " << criterion << ": " << (pass ? "PASS" : "FAIL")
            << " - " << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- criteria 1-3: published cost tables ---------------------------------

void criterion_params() {
  const std::size_t want[][2] = {{3, 147840}, {5, 246144}, {7, 344448}};
  bool pass = true;
  std::ostringstream detail;
  for (const auto& [k, expect] : want) {
    const std::size_t got = NcaeModel(30, 128, k).count_params();
    if (got != expect) pass = false;
    detail << "k=" << k << ": " << got << " ";
  }
  report(1, pass, "parameter counts 147840/246144/344448 for k=3/5/7",
         detail.str());
}

void criterion_flops() {
  const std::pair<std::size_t, double> want[] = {
      {3, 8.863}, {5, 14.761}, {7, 20.659}};
  bool pass = true;
  std::ostringstream detail;
  for (const auto& [k, expect] : want) {
    const CostReport r = flops(NcaeModel(30, 128, k));
    if (r.mflops != expect) pass = false;
    detail << "k=" << k << ": " << r.mflops << " ";
  }
  try {
    const std::size_t s = derive_S_from_flops(
        {{3, 8.863}, {5, 14.761}, {7, 20.659}}, 128);
    if (s != 30) pass = false;
    detail << "derived S=" << s;
  } catch (const std::exception& e) {
    pass = false;
    detail << "derive_S failed: " << e.what();
  }
  report(2, pass, "MFLOPs 8.863/14.761/20.659 at S=30 and derived S=30",
         detail.str());
}

void criterion_ratios() {
  const CostReport ncae = flops(NcaeModel(30, 128, 3));
  const auto ratios = cost_ratios(ncae, PublishedCosts::reference());
  struct Want {
    const char* versus;
    double param_pct;
    double mflops_pct;
  };
  // printed reference percentages
  const Want want[] = {
      {"FARED", 24.870, 22.998},
      {"AE", 5.423, 22.156},
      {"VAE", 4.548, 21.591},
      {"HP-GAN", 4.144, 4.551},
  };
  bool pass = true;
  std::ostringstream detail;
  for (const auto& w : want) {
    const CostRatio* r = nullptr;
    for (const auto& c : ratios)
      if (c.versus == w.versus) r = &c;
    if (!r) {
      pass = false;
      continue;
    }
    // The printed table and the truncation convention agree on seven of the
    // eight cells; the VAE MFLOPs cell computes 21.590 from the printed
    // 3-decimal constants (8.863/41.050) while the table prints 21.591,
    // which only follows from unrounded intermediate values. Agreement at
    // the third decimal (within one unit in the last place) is required.
    if (std::abs(r->param_pct - w.param_pct) > 0.001 + 1e-12) pass = false;
    if (std::abs(r->mflops_pct - w.mflops_pct) > 0.001 + 1e-12) pass = false;
    detail << w.versus << ": " << r->param_pct << "/" << r->mflops_pct << " ";
  }
  // the cells with exactly reproducible arithmetic must be exact
  for (const auto& c : ratios) {
    if (c.versus == "FARED" && c.param_pct != 24.870) pass = false;
    if (c.versus == "AE" && c.mflops_pct != 22.156) pass = false;
    if (c.versus == "HP-GAN" && c.param_pct != 4.144) pass = false;
  }
  report(3, pass, "all eight cost ratios match the printed table to 3 decimals",
         detail.str());
}

// ---- criterion 4: gradient correctness -----------------------------------

void criterion_gradients() {
  const auto t0 = Clock::now();
  Rng rng(20240);
  const double h = 1e-5;
  bool pass = true;
  std::size_t checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 24 && pass; ++trial) {
    const std::size_t batch = 1 + rng.below(4);
    const std::size_t cin = 1 + rng.below(16);
    const std::size_t cout = 1 + rng.below(16);
    const std::size_t s = 1 + rng.below(8);
    const std::size_t k = 2 * rng.below(3) + 1;  // 1, 3, 5
    Conv1dLayer layer(cout, cin, k);
    layer.init_xavier(rng);
    for (auto& b : layer.bias.data) b = rng.uniform(-0.2, 0.2);
    Tensor x = Tensor::zeros({batch, cin, s});
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    Tensor coef = Tensor::zeros({batch, cout, s});
    for (auto& v : coef.data) v = rng.uniform(-1.0, 1.0);

    const auto loss = [&] {
      const Tensor y = conv1d_forward(x, layer);
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * coef[i];
      return acc;
    };
    const Conv1dGrads grads = conv1d_backward(coef, x, layer);
    const auto check = [&](double& p, double analytic) {
      const double keep = p;
      p = keep + h;
      const double up = loss();
      p = keep - h;
      const double dn = loss();
      p = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double rel = std::abs(analytic - fd) /
                         std::max({std::abs(analytic), std::abs(fd), 1e-4});
      worst = std::max(worst, rel);
      ++checked;
      if (rel >= 1e-4) pass = false;
    };
    for (std::size_t i = 0; i < layer.weights.size() && pass; ++i)
      check(layer.weights[i], grads.grad_weights[i]);
    for (std::size_t i = 0; i < layer.bias.size() && pass; ++i)
      check(layer.bias[i], grads.grad_bias[i]);
    for (std::size_t i = 0; i < x.size() && pass; ++i)
      check(x[i], grads.grad_input[i]);
  }
  std::ostringstream detail;
  detail << checked << " derivatives over 24 random layers, worst rel err "
         << worst << ", " << seconds_since(t0) << " s";
  report(4, pass, "analytic conv gradients match finite differences (<1e-4)",
         detail.str());
}

// ---- criterion 5: AUROC oracle -------------------------------------------

void criterion_auroc() {
  Rng rng(555);
  bool pass = true;
  std::size_t sets = 0;
  double worst = 0.0;
  while (sets < 100) {
    const std::size_t n = 4 + rng.below(197);
    std::vector<ScoredSequence> scored(n);
    bool pos = false, neg = false;
    for (auto& s : scored) {
      s.score = static_cast<double>(rng.below(50)) / 16.0;  // ties guaranteed
      s.label = rng.below(2) ? Label::kAbnormal : Label::kNormal;
      (s.label == Label::kAbnormal ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    ++sets;
    double wins = 0.0;
    std::size_t pairs = 0;
    for (const auto& a : scored) {
      if (a.label != Label::kAbnormal) continue;
      for (const auto& m : scored) {
        if (m.label != Label::kNormal) continue;
        ++pairs;
        wins += a.score > m.score ? 1.0 : (a.score == m.score ? 0.5 : 0.0);
      }
    }
    const double brute = wins / static_cast<double>(pairs);
    const double diff = std::abs(auroc(scored) - brute);
    worst = std::max(worst, diff);
    if (diff > 1e-12) pass = false;
  }
  std::ostringstream detail;
  detail << "100 score sets, worst |diff| " << worst;
  report(5, pass, "rank-based AUROC equals the O(n^2) oracle to 1e-12",
         detail.str());
}

// ---- criteria 6 and 10: end-to-end synthetic pipeline --------------------

struct Corpus {
  fs::path dir;
  std::vector<SequenceRecord> records;
  DatasetSplit split;
};

Corpus build_corpus() {
  Corpus c;
  c.dir = fs::temp_directory_path() / "ncae-acceptance";
  fs::remove_all(c.dir);
  fs::create_directories(c.dir);

  SynthConfig synth;  // defaults: 38 dry / 27 wet, seed 7
  const auto files = synth_generate(synth, c.dir.string());

  PreprocessConfig pp;
  for (const auto& info : files) {
    const AudioBuffer audio = read_wav((c.dir / info.filename).string());
    const double thr = default_event_threshold(audio);
    auto events = extract_events(audio, thr, 0.5, 1.0, info.filename);
    for (auto& ev : events) ev.label = info.condition;
    auto recs = records_from_events(events, pp, StackMode::kTumbling);
    c.records.insert(c.records.end(), recs.begin(), recs.end());
  }
  c.split = split_dataset(c.records, 0.8, 1234);
  return c;
}

TrainConfig e2e_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.kernel = 3;
  cfg.max_epochs = 200;
  cfg.seed = seed;
  return cfg;
}

double auroc_on_split(const ReconstructionModel& model,
                      const DatasetSplit& split) {
  std::vector<ScoredSequence> scored;
  for (const auto& s : split.test_normal)
    scored.push_back({score_sequence(model, s), Label::kNormal, s.source_id});
  for (const auto& s : split.test_abnormal)
    scored.push_back({score_sequence(model, s), Label::kAbnormal, s.source_id});
  return auroc(scored);
}

void criterion_end_to_end(const Corpus& corpus) {
  const auto t0 = Clock::now();
  bool pass = true;
  std::ostringstream detail;

  NcaeModel model(30, 128, 3);
  train(model, corpus.split.train, e2e_config(42));
  const double a = auroc_on_split(model, corpus.split);
  detail << "single-run AUROC " << a;
  if (a < 0.95) pass = false;

  const std::size_t n_test =
      corpus.split.test_normal.size() + corpus.split.test_abnormal.size();
  const MonteCarloReport mc =
      monte_carlo(5, 42, [&](std::uint64_t seed) {
        NcaeModel m(30, 128, 3);
        const TrainRecord rec = train(m, corpus.split.train, e2e_config(seed));
        const auto ti = Clock::now();
        const double run_auroc = auroc_on_split(m, corpus.split);
        return MonteCarloRun{run_auroc, rec.epoch_seconds.back(),
                             seconds_since(ti) / static_cast<double>(n_test)};
      });
  detail << ", MC mean " << mc.auroc_mean << " sd " << mc.auroc_sd << " ["
         << mc.auroc_min << ", " << mc.auroc_max << "], "
         << seconds_since(t0) << " s";
  if (mc.auroc_mean < 0.95 || mc.auroc_sd > 0.05) pass = false;

  report(6, pass,
         "synthetic-corpus AUROC >= 0.95 single run and over 5 Monte Carlo "
         "seeds (sd <= 0.05)",
         detail.str());
}

// ---- criterion 7: relative inference cost --------------------------------

void criterion_inference_speed() {
  const auto t0 = Clock::now();
  Rng rng(7100);
  NcaeModel ncae(30, 128, 3);
  BottleneckAeModel baseline(30, 128, 3);
  ncae.init_xavier(rng);
  baseline.init_xavier(rng);

  const std::size_t batch = 16, batches = 64;  // 1024 sequences
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < batches; ++i) {
    Tensor x = Tensor::zeros({batch, 30, 128});
    for (auto& v : x.data) v = rng.uniform01();
    inputs.push_back(std::move(x));
  }

  const auto time_model = [&](const ReconstructionModel& m) {
    double sink = 0.0;
    const auto t = Clock::now();
    for (const auto& x : inputs) sink += m.reconstruct(x)[0];
    const double elapsed = seconds_since(t);
    return sink == sink ? elapsed : -1.0;  // keep the work observable
  };
  time_model(ncae);  // warm-up
  const double t_ncae = time_model(ncae);
  const double t_base = time_model(baseline);
  const double speedup = t_base / t_ncae;
  std::ostringstream detail;
  detail << batches * batch << " sequences, ncae "
         << t_ncae / static_cast<double>(batches * batch) << " s/seq, baseline "
         << t_base / static_cast<double>(batches * batch)
         << " s/seq, speedup x" << speedup << ", " << seconds_since(t0)
         << " s total";
  report(7, speedup >= 2.0,
         "ncae inference at least 2x faster than the bottleneck baseline",
         detail.str());
}

// ---- criterion 8: preprocessing contract ---------------------------------

void criterion_preprocessing() {
  PreprocessConfig cfg;
  bool pass = true;
  std::ostringstream detail;

  AudioBuffer a;
  a.sample_rate = 44100;
  a.samples.resize(22050);
  Rng rng(8);
  for (auto& s : a.samples) s = rng.uniform(-0.5, 0.5);
  const auto segs = segment_stream(a, cfg);
  if (segs.size() != 1 || segs[0].size() != 22050) pass = false;
  const Spectrogram spec = stft(segs[0], cfg);
  detail << spec.frames << " frames, " << spec.bins << " bins";
  if (spec.frames != 40 || spec.bins != 1025) pass = false;

  const MelFilterbank fb = build_mel_filterbank(cfg);
  const auto mel = mel_spectra(spec, fb, cfg);
  const MfccVector v = time_average(mel, cfg.n_mels, spec.frames);
  detail << ", vector length " << v.coeffs.size();
  if (v.coeffs.size() != 128) pass = false;

  std::vector<MfccVector> vecs(65, v);
  const auto seqs = stack_sequences(vecs, cfg, StackMode::kTumbling);
  detail << ", 65 vectors -> " << seqs.size() << " tumbling sequences";
  if (seqs.size() != 2) pass = false;
  for (const auto& s : seqs)
    if (s.rows != 30 || s.cols != 128) pass = false;

  report(8, pass,
         "500 ms segment -> 40 frames, 128-d vector; 65 vectors -> 2 "
         "sequences at S=30",
         detail.str());
}

// ---- criterion 9: Eq. 2 threshold ----------------------------------------

void criterion_threshold() {
  bool pass = true;
  std::ostringstream detail;
  const Threshold t = tukey_threshold({0.8, 1.2});
  detail << "theta({0.8,1.2}) = " << t.theta;
  if (std::abs(t.theta - 1.3) > 1e-15) pass = false;

  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores(2 + rng.below(40));
    for (double& s : scores) s = rng.uniform(0.0, 5.0);
    const double scale = rng.uniform(0.1, 9.0);
    const double shift = rng.uniform(-4.0, 4.0);
    const double base = tukey_threshold(scores).theta;
    std::vector<double> mapped = scores;
    for (double& s : mapped) s = scale * s + shift;
    const double got = tukey_threshold(mapped).theta;
    worst = std::max(worst, std::abs(got - (scale * base + shift)));
  }
  detail << ", worst affine-equivariance error " << worst;
  if (worst > 1e-12) pass = false;
  report(9, pass, "tukey threshold: theta = mu + 1.5 sigma, affine equivariant",
         detail.str());
}

// ---- criterion 10: determinism -------------------------------------------

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

void criterion_determinism(const Corpus& corpus) {
  const auto t0 = Clock::now();
  bool pass = true;
  std::ostringstream detail;

  // cmd_train twice with an identical config and seed
  const fs::path seq_path = corpus.dir / "acc-seq.bin";
  write_sequence_bundle(seq_path.string(), corpus.records);
  const std::string base =
      std::string(NCAE_CLI_PATH) + " train --sequences " + seq_path.string() +
      " --max_epochs 15 --seed 42 --model ";
  const fs::path m1 = corpus.dir / "det1.bin";
  const fs::path m2 = corpus.dir / "det2.bin";
  const std::string log = (corpus.dir / "det.log").string();
  int rc1 = WEXITSTATUS(
      std::system((base + m1.string() + " >" + log + " 2>&1").c_str()));
  int rc2 = WEXITSTATUS(
      std::system((base + m2.string() + " >" + log + " 2>&1").c_str()));
  if (rc1 != 0 || rc2 != 0) pass = false;
  const bool identical = file_bytes(m1) == file_bytes(m2);
  detail << "model files " << (identical ? "byte-identical" : "DIFFER");
  if (!identical) pass = false;

  // Monte Carlo with identical per-run seeds reports zero spread
  TrainConfig cfg = e2e_config(4242);
  cfg.max_epochs = 10;
  std::vector<MfccSequence> small(corpus.split.train.begin(),
                                  corpus.split.train.begin() + 8);
  const MonteCarloReport mc = monte_carlo(3, 0, [&](std::uint64_t) {
    NcaeModel m(30, 128, 3);  // seed fixed in cfg, the run seed is ignored
    train(m, small, cfg);
    return MonteCarloRun{auroc_on_split(m, corpus.split), 0.0, 0.0};
  });
  detail << ", fixed-seed MC sd " << mc.auroc_sd << ", " << seconds_since(t0)
         << " s";
  if (mc.auroc_sd != 0.0) pass = false;

  report(10, pass,
         "identical config+seed gives byte-identical models and zero Monte "
         "Carlo spread",
         detail.str());
}

}  // namespace

int main() {
  criterion_params();
  criterion_flops();
  criterion_ratios();
  criterion_gradients();
  criterion_auroc();

  const Corpus corpus = build_corpus();
  criterion_end_to_end(corpus);
  criterion_inference_speed();
  criterion_preprocessing();
  criterion_threshold();
  criterion_determinism(corpus);

  fs::remove_all(fs::temp_directory_path() / "ncae-acceptance");
  if (g_failures > 0) {
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all criteria passed" << std::endl;
  return 0;
}
