#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncae/model.hpp"
#include "ncae/tensor.hpp"

namespace ncae {

/// Raised when training diverges (non-finite loss); callers can map this to
/// a dedicated exit status.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t kernel = 3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 1000;
  std::size_t patience = 20;  // epochs without improvement before stopping
  double min_delta = 1e-5;
  std::uint64_t seed = 42;
  bool shuffle = true;

  void validate() const;
};

enum class StopReason { kConverged, kMaxEpochs };

struct TrainRecord {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_seconds;  // cumulative wall clock
  std::size_t final_epoch = 0;
  StopReason stop_reason = StopReason::kMaxEpochs;
};

/// Mean per-sample Euclidean distance between two N x S x D batches:
/// (1/N) * sum_n sqrt(sum_{s,d} (x - xhat)^2).
double euclidean_loss(const Tensor& x, const Tensor& xhat);

/// dLoss/dxhat for euclidean_loss. Zero where a sample reconstructs exactly.
Tensor euclidean_loss_grad(const Tensor& x, const Tensor& xhat);

/// Mini-batch training on normal sequences only. Fits norm stats from the
/// dataset, initializes with Xavier, runs Adam on shuffled mini-batches and
/// stops once the best epoch loss has not improved by min_delta for
/// `patience` consecutive epochs. Also computes the Tukey decision
/// threshold over the training scores and stores it on the model.
TrainRecord train(ReconstructionModel& model,
                  const std::vector<MfccSequence>& dataset,
                  const TrainConfig& cfg);

struct GridCell {
  double learning_rate = 0.0;
  std::size_t kernel = 0;
  std::optional<double> auroc;  // missing if the cell aborted (NaN loss)
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best_index = 0;
};

/// Evaluation hook: given a freshly trained model, return its test AUROC.
using EvalHook = std::function<double(ReconstructionModel&)>;

/// Factory hook so the grid can train any model family.
using ModelFactory =
    std::function<std::unique_ptr<ReconstructionModel>(std::size_t kernel)>;

/// Trains one model per (learning rate, kernel) cell with seed =
/// base_seed + cell index and evaluates it with the hook. Best cell is the
/// max AUROC; ties break toward smaller kernel, then larger learning rate.
/// A cell that aborts with non-finite loss records a missing AUROC.
GridResult grid_search(const std::vector<MfccSequence>& train_set,
                       const std::vector<double>& learning_rates,
                       const std::vector<std::size_t>& kernels,
                       const TrainConfig& base_cfg,
                       const ModelFactory& make_model, const EvalHook& eval);

/// Writes "kernel,learning_rate,auroc" rows.
void write_grid_csv(const std::string& path, const GridResult& result);

/// Writes "epoch,loss,cumulative_seconds" rows.
void write_loss_csv(const std::string& path, const TrainRecord& record);

}  // namespace ncae
