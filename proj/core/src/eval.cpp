#include "ncae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace ncae {

double score_sequence(const ReconstructionModel& model,
                      const MfccSequence& seq) {
  return score_batch(model, {seq}).front();
}

std::vector<double> score_batch(const ReconstructionModel& model,
                                const std::vector<MfccSequence>& seqs) {
  if (seqs.empty()) return {};
  const Tensor x = normalize(batch_from_sequences(seqs), model.norm_stats);
  const Tensor xhat = model.reconstruct(x);
  const std::size_t n = x.dim(0);
  const std::size_t per = x.dim(1) * x.dim(2);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < per; ++j) {
      const double d = x.data[i * per + j] - xhat.data[i * per + j];
      acc += d * d;
    }
    scores[i] = std::sqrt(acc);
  }
  return scores;
}

double auroc(const std::vector<ScoredSequence>& scored) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& s : scored)
    (s.label == Label::kAbnormal ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auroc: undefined AUROC, need both classes");

  // midrank formulation: AUROC = (R_pos - n_pos(n_pos+1)/2) / (n_pos*n_neg)
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scored[a].score < scored[b].score;
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() &&
           scored[order[j]].score == scored[order[i]].score)
      ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (scored[order[k]].label == Label::kAbnormal) rank_sum_pos += midrank;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

Threshold tukey_threshold(const std::vector<double>& train_scores,
                          double sigma_multiplier) {
  if (train_scores.size() < 2)
    throw std::invalid_argument("tukey_threshold: need at least 2 scores");
  const double n = static_cast<double>(train_scores.size());
  double mu = 0.0;
  for (double s : train_scores) mu += s;
  mu /= n;
  double var = 0.0;
  for (double s : train_scores) var += (s - mu) * (s - mu);
  var /= n;  // population variance
  Threshold t;
  t.mu = mu;
  t.sigma = std::sqrt(var);
  t.theta = mu + sigma_multiplier * t.sigma;
  return t;
}

Label classify(double score, const Threshold& threshold) {
  return score > threshold.theta ? Label::kAbnormal : Label::kNormal;
}

MonteCarloReport monte_carlo(
    std::size_t runs, std::uint64_t base_seed,
    const std::function<MonteCarloRun(std::uint64_t seed)>& run_one) {
  if (runs < 2)
    throw std::invalid_argument("monte_carlo: need R >= 2 runs");
  std::vector<MonteCarloRun> results;
  results.reserve(runs);
  for (std::size_t r = 1; r <= runs; ++r)
    results.push_back(run_one(base_seed + r));

  MonteCarloReport rep;
  rep.runs = runs;
  rep.auroc_min = results.front().auroc;
  rep.auroc_max = results.front().auroc;
  double sum = 0.0, train_sum = 0.0, infer_sum = 0.0;
  for (const auto& r : results) {
    rep.auroc_min = std::min(rep.auroc_min, r.auroc);
    rep.auroc_max = std::max(rep.auroc_max, r.auroc);
    sum += r.auroc;
    train_sum += r.train_seconds;
    infer_sum += r.inference_seconds_per_seq;
  }
  rep.auroc_mean = sum / static_cast<double>(runs);
  if (rep.auroc_min == rep.auroc_max) {
    // A constant series has zero variance; sum/mean rounding in the
    // two-pass formula would otherwise report a spurious ~1e-16 spread.
    rep.auroc_mean = rep.auroc_min;
    rep.auroc_sd = 0.0;
  } else {
    double ss = 0.0;
    for (const auto& r : results)
      ss += (r.auroc - rep.auroc_mean) * (r.auroc - rep.auroc_mean);
    rep.auroc_sd = std::sqrt(ss / static_cast<double>(runs - 1));
  }
  rep.mean_train_seconds = train_sum / static_cast<double>(runs);
  rep.mean_inference_seconds = infer_sum / static_cast<double>(runs);
  return rep;
}

std::vector<double> error_map(const MfccSequence& x, const MfccSequence& xhat,
                              double floor) {
  if (x.rows != xhat.rows || x.cols != xhat.cols)
    throw std::invalid_argument("error_map: shape mismatch");
  std::vector<double> out(x.rows * x.cols);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = x.data[i] - xhat.data[i];
    out[i] = std::log10(std::max(d * d, floor));
  }
  return out;
}

void write_pgm(const std::string& path, const std::vector<double>& values,
               std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("write_pgm: size mismatch");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
  f << "P5\n" << cols << " " << rows << "\n255\n";
  for (double v : values) {
    const int g = static_cast<int>(std::lround((v - lo) / span * 255.0));
    f.put(static_cast<char>(std::clamp(g, 0, 255)));
  }
}

void write_matrix_csv(const std::string& path,
                      const std::vector<double>& values, std::size_t rows,
                      std::size_t cols) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("write_matrix_csv: size mismatch");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_matrix_csv: cannot open " + path);
  f << std::setprecision(17);
  for (std::size_t c = 0; c < cols; ++c) {
    if (c) f << ',';
    f << 'c' << c;
  }
  f << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) f << ',';
      f << values[r * cols + c];
    }
    f << '\n';
  }
}

void write_eval_report(const std::string& path,
                       const std::vector<ScoredSequence>& scored,
                       double auroc_value, const Threshold& threshold,
                       const MonteCarloReport* mc) {
  nlohmann::json j;
  j["auroc"] = auroc_value;
  j["threshold"] = {{"theta", threshold.theta},
                    {"mu", threshold.mu},
                    {"sigma", threshold.sigma}};
  auto& arr = j["scores"] = nlohmann::json::array();
  for (const auto& s : scored)
    arr.push_back({{"source_id", s.source_id},
                   {"score", s.score},
                   {"label", s.label == Label::kAbnormal ? "abnormal"
                                                         : "normal"}});
  if (mc) {
    j["monte_carlo"] = {{"runs", mc->runs},
                        {"auroc_min", mc->auroc_min},
                        {"auroc_max", mc->auroc_max},
                        {"auroc_mean", mc->auroc_mean},
                        {"auroc_sd", mc->auroc_sd},
                        {"mean_train_seconds", mc->mean_train_seconds},
                        {"mean_inference_seconds", mc->mean_inference_seconds}};
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_eval_report: cannot open " + path);
  f << j.dump(2) << '\n';
}

void write_monte_carlo_csv(const std::string& path,
                           const MonteCarloReport& report) {
  std::ofstream f(path, std::ios::trunc);
  if (!f)
    throw std::runtime_error("write_monte_carlo_csv: cannot open " + path);
  f << std::setprecision(17);
  f << "runs,auroc_min,auroc_max,auroc_mean,auroc_sd,"
       "mean_train_seconds,mean_inference_seconds\n";
  f << report.runs << ',' << report.auroc_min << ',' << report.auroc_max
    << ',' << report.auroc_mean << ',' << report.auroc_sd << ','
    << report.mean_train_seconds << ',' << report.mean_inference_seconds
    << '\n';
}

}  // namespace ncae
