#include <cmath>
#include <fstream>
#include <memory>

#include "doctest.h"
#include "helpers.hpp"
#include "ncae/optim.hpp"
#include "ncae/training.hpp"

using namespace ncae;
using testutil::random_tensor;

namespace {

std::vector<MfccSequence> random_sequences(std::size_t n, std::size_t s,
                                           std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MfccSequence> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].rows = s;
    out[i].cols = d;
    out[i].source_id = "seq" + std::to_string(i);
    out[i].data.resize(s * d);
    for (double& v : out[i].data) v = rng.uniform(-1.0, 2.0);
  }
  return out;
}

}  // namespace

TEST_CASE("euclidean loss hand examples") {
  Tensor x({1, 1, 2}, {1.0, 2.0});
  CHECK(euclidean_loss(x, x) == 0.0);
  const Tensor zero = Tensor::zeros({1, 1, 2});
  CHECK(euclidean_loss(x, zero) == doctest::Approx(std::sqrt(5.0)));

  // two samples with per-sample distances 1 and 3 average to 2
  Tensor a = Tensor::zeros({2, 1, 1});
  Tensor b({2, 1, 1}, {1.0, 3.0});
  CHECK(euclidean_loss(a, b) == doctest::Approx(2.0));

  Tensor wrong = Tensor::zeros({1, 2, 1});
  CHECK_THROWS(euclidean_loss(x, wrong));
}

TEST_CASE("euclidean loss gradient matches finite differences") {
  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  Tensor xhat = random_tensor({2, 3, 4}, rng);
  const Tensor g = euclidean_loss_grad(x, xhat);
  const double h = 1e-6;
  for (std::size_t i = 0; i < xhat.size(); ++i) {
    const double keep = xhat[i];
    xhat[i] = keep + h;
    const double up = euclidean_loss(x, xhat);
    xhat[i] = keep - h;
    const double dn = euclidean_loss(x, xhat);
    xhat[i] = keep;
    CHECK(testutil::rel_err(g[i], (up - dn) / (2 * h)) < 1e-5);
  }
  // exact reconstruction has zero gradient, not NaN
  const Tensor gz = euclidean_loss_grad(x, x);
  CHECK(max_abs_diff(gz, Tensor::zeros(x.shape)) == 0.0);
}

TEST_CASE("train overfits a single sequence") {
  auto seqs = random_sequences(1, 4, 6, 11);
  NcaeModel model(4, 6, 3);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 500;
  cfg.patience = 500;
  cfg.min_delta = 0.0;
  const TrainRecord rec = train(model, seqs, cfg);
  CHECK(rec.epoch_loss.back() < 0.01 * rec.epoch_loss.front());
  CHECK(rec.epoch_loss.size() == rec.final_epoch);
  CHECK(rec.epoch_seconds.size() == rec.final_epoch);
  CHECK(model.threshold.valid == false);  // one score is not enough for theta
}

TEST_CASE("training is seed-deterministic") {
  auto seqs = random_sequences(6, 4, 5, 17);
  TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.seed = 99;
  NcaeModel a(4, 5, 3), b(4, 5, 3);
  const TrainRecord ra = train(a, seqs, cfg);
  const TrainRecord rb = train(b, seqs, cfg);
  CHECK(ra.epoch_loss == rb.epoch_loss);
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i]->data == pb[i]->data);
  CHECK(a.threshold.theta == b.threshold.theta);
}

TEST_CASE("zero learning rate leaves the loss unchanged") {
  auto seqs = random_sequences(4, 3, 4, 23);
  NcaeModel model(3, 4, 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;  // not in the tuning grid; exercises the zero step
  cfg.max_epochs = 5;
  cfg.shuffle = false;
  const TrainRecord rec = train(model, seqs, cfg);
  for (double l : rec.epoch_loss)
    CHECK(l == doctest::Approx(rec.epoch_loss.front()).epsilon(1e-15));
}

TEST_CASE("one Adam step at small lr decreases the batch loss") {
  auto seqs = random_sequences(4, 3, 5, 29);
  NcaeModel model(3, 5, 3);
  Rng rng(31);
  model.init_xavier(rng);
  model.norm_stats = NormStats::fit(seqs);
  const Tensor x = normalize(batch_from_sequences(seqs), model.norm_stats);

  const Tensor xhat = model.forward_cached(x);
  const double before = euclidean_loss(x, xhat);
  const auto grads = model.backward(euclidean_loss_grad(x, xhat));
  auto params = model.parameters();
  AdamState state = AdamState::create(params, 1e-5);
  std::vector<const Tensor*> gp;
  for (const auto& g : grads) gp.push_back(&g);
  adam_step(params, gp, state);
  CHECK(euclidean_loss(x, model.reconstruct(x)) < before);
}

TEST_CASE("full-batch gradient equals the mean of per-sample gradients") {
  auto seqs = random_sequences(5, 3, 4, 37);
  NcaeModel model(3, 4, 3);
  Rng rng(41);
  model.init_xavier(rng);
  model.norm_stats = NormStats::fit(seqs);

  const Tensor full = normalize(batch_from_sequences(seqs), model.norm_stats);
  const Tensor xhat = model.forward_cached(full);
  const auto batch_grads = model.backward(euclidean_loss_grad(full, xhat));

  std::vector<Tensor> accum;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Tensor xi =
        normalize(batch_from_sequence(seqs[i]), model.norm_stats);
    const Tensor yi = model.forward_cached(xi);
    const auto gi = model.backward(euclidean_loss_grad(xi, yi));
    if (accum.empty()) {
      accum = gi;
    } else {
      for (std::size_t p = 0; p < gi.size(); ++p) accum[p] += gi[p];
    }
  }
  for (auto& t : accum) t *= 1.0 / static_cast<double>(seqs.size());
  for (std::size_t p = 0; p < accum.size(); ++p)
    CHECK(max_abs_diff(accum[p], batch_grads[p]) < 1e-10);
}

TEST_CASE("train validates its inputs") {
  NcaeModel model(3, 4, 3);
  TrainConfig cfg;
  CHECK_THROWS(train(model, {}, cfg));
  TrainConfig bad = cfg;
  bad.learning_rate = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.kernel = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("divergent training aborts with a numerical error") {
  auto seqs = random_sequences(4, 3, 4, 43);
  NcaeModel model(3, 4, 3);
  TrainConfig cfg;
  cfg.learning_rate = 1e200;  // guaranteed overflow
  cfg.max_epochs = 50;
  CHECK_THROWS_AS(train(model, seqs, cfg), NumericalError);
}

TEST_CASE("grid search") {
  auto seqs = random_sequences(6, 3, 4, 47);
  TrainConfig base;
  base.max_epochs = 3;
  const ModelFactory factory = [](std::size_t k) {
    return std::make_unique<NcaeModel>(3, 4, k);
  };
  // deterministic fake evaluation keyed on the cell's hyperparameters
  std::vector<std::pair<std::size_t, double>> seen;
  const auto eval = [&](ReconstructionModel& m) {
    auto& ncae = dynamic_cast<NcaeModel&>(m);
    const double a = 0.5 + 0.01 * static_cast<double>(ncae.kernel());
    seen.emplace_back(ncae.kernel(), a);
    return a;
  };

  SUBCASE("full 6 x 3 grid yields 18 cells, kernel-major order") {
    const std::vector<double> lrs = {5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5};
    const GridResult r =
        grid_search(seqs, lrs, {3, 5, 7}, base, factory, eval);
    REQUIRE(r.cells.size() == 18);
    CHECK(r.cells[0].kernel == 3);
    CHECK(r.cells[0].learning_rate == 5e-3);
    CHECK(r.cells[6].kernel == 5);
    CHECK(r.cells[17].learning_rate == 1e-5);
    // max AUROC here is k=7; ties break toward larger lr, so the first k=7 cell
    const GridCell& best = r.cells[r.best_index];
    CHECK(best.kernel == 7);
    CHECK(best.learning_rate == 5e-3);
  }

  SUBCASE("single-cell grid") {
    const GridResult r = grid_search(seqs, {1e-3}, {3}, base, factory, eval);
    REQUIRE(r.cells.size() == 1);
    CHECK(r.best_index == 0);
  }

  SUBCASE("aborted cells record missing AUROC without killing the sweep") {
    const GridResult r =
        grid_search(seqs, {1e200, 1e-3}, {3}, base, factory, eval);
    REQUIRE(r.cells.size() == 2);
    CHECK(!r.cells[0].auroc.has_value());
    CHECK(r.cells[1].auroc.has_value());
    CHECK(r.best_index == 1);
  }

  SUBCASE("grid CSV layout") {
    testutil::TempDir dir("ncae-grid-csv");
    const GridResult r =
        grid_search(seqs, {1e200, 1e-3}, {3}, base, factory, eval);
    const std::string path = dir.file("grid.csv");
    write_grid_csv(path, r);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "kernel,learning_rate,auroc");
    std::getline(f, line);
    CHECK(line.find("NA") != std::string::npos);
    std::size_t rows = 1;
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 2);
  }
}

TEST_CASE("loss CSV layout") {
  testutil::TempDir dir("ncae-loss-csv");
  TrainRecord rec;
  rec.epoch_loss = {2.0, 1.0};
  rec.epoch_seconds = {0.1, 0.2};
  rec.final_epoch = 2;
  const std::string path = dir.file("loss.csv");
  write_loss_csv(path, rec);
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "epoch,loss,cumulative_seconds");
  std::size_t rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 2);
}
