#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ncae/model.hpp"
#include "ncae/tensor.hpp"

namespace ncae {

enum class Label { kNormal, kAbnormal };

struct ScoredSequence {
  double score = 0.0;
  Label label = Label::kNormal;
  std::string source_id;
};

/// theta = mu + multiplier * sigma over training reconstruction errors
/// (Tukey-fences style; sigma is the population standard deviation).
struct Threshold {
  double theta = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

struct MonteCarloReport {
  double auroc_min = 0.0;
  double auroc_max = 0.0;
  double auroc_mean = 0.0;
  double auroc_sd = 0.0;  // sample SD (n-1)
  double mean_train_seconds = 0.0;
  double mean_inference_seconds = 0.0;  // per sequence
  std::size_t runs = 0;
};

/// Reconstruction error of one sequence: sqrt(sum (x - xhat)^2) on
/// normalized values.
double score_sequence(const ReconstructionModel& model,
                      const MfccSequence& seq);

/// Scores for a whole batch at once (one distance per sample).
std::vector<double> score_batch(const ReconstructionModel& model,
                                const std::vector<MfccSequence>& seqs);

/// Exact rank-based (Mann-Whitney) AUROC: fraction of (abnormal, normal)
/// pairs where the abnormal scores higher, ties counted 0.5. Throws if only
/// one class is present.
double auroc(const std::vector<ScoredSequence>& scored);

Threshold tukey_threshold(const std::vector<double>& train_scores,
                          double sigma_multiplier = 1.5);

/// Abnormal iff score > theta (strict).
Label classify(double score, const Threshold& threshold);

struct MonteCarloRun {
  double auroc = 0.0;
  double train_seconds = 0.0;
  double inference_seconds_per_seq = 0.0;
};

/// R independent train+eval runs; the closure receives the run's seed.
MonteCarloReport monte_carlo(
    std::size_t runs, std::uint64_t base_seed,
    const std::function<MonteCarloRun(std::uint64_t seed)>& run_one);

/// Log-scaled pixel-wise squared error map, S x D:
/// log10(max((x - xhat)^2, floor)) per cell.
std::vector<double> error_map(const MfccSequence& x, const MfccSequence& xhat,
                              double floor = 1e-12);

/// 8-bit PGM of a rows x cols matrix, min-max scaled.
void write_pgm(const std::string& path, const std::vector<double>& values,
               std::size_t rows, std::size_t cols);

void write_matrix_csv(const std::string& path,
                      const std::vector<double>& values, std::size_t rows,
                      std::size_t cols);

/// Scores + AUROC + threshold + Monte Carlo summary as a JSON report file.
void write_eval_report(const std::string& path,
                       const std::vector<ScoredSequence>& scored,
                       double auroc_value, const Threshold& threshold,
                       const MonteCarloReport* mc = nullptr);

void write_monte_carlo_csv(const std::string& path,
                           const MonteCarloReport& report);

}  // namespace ncae
