#include "ncae/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ncae/eval.hpp"
#include "ncae/optim.hpp"
#include "ncae/rng.hpp"

namespace ncae {

void TrainConfig::validate() const {
  // Zero is tolerated (it makes training a no-op, which tests exploit);
  // negative rates are always a mistake.
  if (learning_rate < 0.0)
    throw std::invalid_argument("train: learning_rate must be >= 0");
  if (batch_size == 0)
    throw std::invalid_argument("train: batch_size must be >= 1");
  if (patience == 0) throw std::invalid_argument("train: patience must be >= 1");
  if (max_epochs == 0)
    throw std::invalid_argument("train: max_epochs must be >= 1");
  if (kernel % 2 == 0)
    throw std::invalid_argument("train: kernel must be odd");
}

double euclidean_loss(const Tensor& x, const Tensor& xhat) {
  if (!x.same_shape(xhat))
    throw std::invalid_argument("euclidean_loss: shape mismatch " +
                                shape_str(x.shape) + " vs " +
                                shape_str(xhat.shape));
  if (x.rank() != 3)
    throw std::invalid_argument("euclidean_loss: expected N x S x D");
  const std::size_t n = x.dim(0);
  const std::size_t per = x.dim(1) * x.dim(2);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < per; ++j) {
      const double d = x.data[i * per + j] - xhat.data[i * per + j];
      acc += d * d;
    }
    total += std::sqrt(acc);
  }
  return total / static_cast<double>(n);
}

Tensor euclidean_loss_grad(const Tensor& x, const Tensor& xhat) {
  if (!x.same_shape(xhat))
    throw std::invalid_argument("euclidean_loss_grad: shape mismatch");
  const std::size_t n = x.dim(0);
  const std::size_t per = x.dim(1) * x.dim(2);
  Tensor g = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < per; ++j) {
      const double d = x.data[i * per + j] - xhat.data[i * per + j];
      acc += d * d;
    }
    const double dist = std::sqrt(acc);
    if (dist == 0.0) continue;
    const double scale = 1.0 / (static_cast<double>(n) * dist);
    for (std::size_t j = 0; j < per; ++j)
      g.data[i * per + j] = scale * (xhat.data[i * per + j] -
                                     x.data[i * per + j]);
  }
  return g;
}

namespace {

// Fisher-Yates with our own generator so shuffles are identical on every
// platform.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
}

Tensor slice_batch(const Tensor& all, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t end) {
  const std::size_t per = all.dim(1) * all.dim(2);
  Tensor b = Tensor::zeros({end - begin, all.dim(1), all.dim(2)});
  for (std::size_t i = begin; i < end; ++i)
    std::copy(all.data.begin() + static_cast<std::ptrdiff_t>(idx[i] * per),
              all.data.begin() + static_cast<std::ptrdiff_t>((idx[i] + 1) * per),
              b.data.begin() + static_cast<std::ptrdiff_t>((i - begin) * per));
  return b;
}

}  // namespace

TrainRecord train(ReconstructionModel& model,
                  const std::vector<MfccSequence>& dataset,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty())
    throw std::invalid_argument("train: empty dataset");
  for (const auto& seq : dataset)
    if (seq.rows != model.seq_len() || seq.cols != model.feat_dim())
      throw std::invalid_argument("train: sequence shape does not match model");

  model.norm_stats = NormStats::fit(dataset);
  const Tensor all = normalize(batch_from_sequences(dataset), model.norm_stats);
  const std::size_t n = dataset.size();

  Rng rng(cfg.seed);
  model.init_xavier(rng);
  auto params = model.parameters();
  AdamState adam = AdamState::create(params, cfg.learning_rate);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  TrainRecord record;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (cfg.shuffle) shuffle_indices(idx, rng);
    double dist_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, n);
      const Tensor xb = slice_batch(all, idx, begin, end);
      const Tensor xhat = model.forward_cached(xb);
      const double batch_loss = euclidean_loss(xb, xhat);
      if (!std::isfinite(batch_loss))
        throw NumericalError(
            "train: non-finite loss at epoch " + std::to_string(epoch) +
            " (lr=" + std::to_string(cfg.learning_rate) + ")");
      dist_sum += batch_loss * static_cast<double>(end - begin);
      const Tensor grad_out = euclidean_loss_grad(xb, xhat);
      const std::vector<Tensor> grads = model.backward(grad_out);
      std::vector<const Tensor*> grad_ptrs;
      grad_ptrs.reserve(grads.size());
      for (const auto& g : grads) grad_ptrs.push_back(&g);
      adam_step(params, grad_ptrs, adam);
    }
    const double epoch_loss = dist_sum / static_cast<double>(n);
    record.epoch_loss.push_back(epoch_loss);
    record.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count());

    if (best_loss - epoch_loss >= cfg.min_delta) {
      best_loss = epoch_loss;
      stale_epochs = 0;
    } else {
      best_loss = std::min(best_loss, epoch_loss);
      stale_epochs += 1;
      if (stale_epochs >= cfg.patience) {
        record.stop_reason = StopReason::kConverged;
        break;
      }
    }
  }
  record.final_epoch = record.epoch_loss.size();
  if (record.stop_reason != StopReason::kConverged)
    record.stop_reason = StopReason::kMaxEpochs;

  // decision threshold over the training reconstruction errors
  const std::vector<double> train_scores = score_batch(model, dataset);
  if (train_scores.size() >= 2) {
    const Threshold t = tukey_threshold(train_scores);
    model.threshold = {t.theta, t.mu, t.sigma, true};
  }
  return record;
}

GridResult grid_search(const std::vector<MfccSequence>& train_set,
                       const std::vector<double>& learning_rates,
                       const std::vector<std::size_t>& kernels,
                       const TrainConfig& base_cfg,
                       const ModelFactory& make_model, const EvalHook& eval) {
  if (learning_rates.empty() || kernels.empty())
    throw std::invalid_argument("grid_search: empty grid");

  GridResult result;
  std::size_t cell_index = 0;
  for (std::size_t k : kernels) {
    for (double lr : learning_rates) {
      GridCell cell;
      cell.learning_rate = lr;
      cell.kernel = k;
      TrainConfig cfg = base_cfg;
      cfg.learning_rate = lr;
      cfg.kernel = k;
      cfg.seed = base_cfg.seed + cell_index;
      try {
        auto model = make_model(k);
        train(*model, train_set, cfg);
        cell.auroc = eval(*model);
      } catch (const NumericalError&) {
        // aborted cell (non-finite loss); AUROC stays missing
      }
      result.cells.push_back(cell);
      ++cell_index;
    }
  }

  // best cell: max AUROC, ties toward smaller kernel then larger lr
  std::size_t best = result.cells.size();
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& c = result.cells[i];
    if (!c.auroc) continue;
    if (best == result.cells.size()) {
      best = i;
      continue;
    }
    const auto& b = result.cells[best];
    if (*c.auroc > *b.auroc ||
        (*c.auroc == *b.auroc &&
         (c.kernel < b.kernel ||
          (c.kernel == b.kernel && c.learning_rate > b.learning_rate))))
      best = i;
  }
  if (best == result.cells.size())
    throw std::runtime_error("grid_search: every cell aborted");
  result.best_index = best;
  return result;
}

void write_grid_csv(const std::string& path, const GridResult& result) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_grid_csv: cannot open " + path);
  f << std::setprecision(17);
  f << "kernel,learning_rate,auroc\n";
  for (const auto& c : result.cells) {
    f << c.kernel << ',' << c.learning_rate << ',';
    if (c.auroc)
      f << *c.auroc;
    else
      f << "NA";
    f << '\n';
  }
}

void write_loss_csv(const std::string& path, const TrainRecord& record) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_loss_csv: cannot open " + path);
  f << std::setprecision(17);
  f << "epoch,loss,cumulative_seconds\n";
  for (std::size_t i = 0; i < record.epoch_loss.size(); ++i)
    f << (i + 1) << ',' << record.epoch_loss[i] << ','
      << record.epoch_seconds[i] << '\n';
}

}  // namespace ncae
