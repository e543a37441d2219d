#include "debiasmix/identification.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "debiasmix/errors.hpp"

namespace debiasmix {

void SinglePredictionOptions::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("SP: gamma must lie in (0, 1)");
  if (max_epochs < 1) throw ConfigError("SP: max_epochs must be >= 1");
  train.validate();
}

BiasSplit split_from_predictions(const std::vector<bool>& correct, double gamma, int epochs) {
  std::vector<bool> unbias(correct.size());
  for (std::size_t i = 0; i < correct.size(); ++i) unbias[i] = !correct[i];
  return BiasSplit::from_mask(unbias, SplitMethod::kSinglePrediction, {{"gamma", gamma}}, epochs);
}

SinglePredictionResult split_by_single_prediction(const DatasetBundle& bundle, const SinglePredictionOptions& opts) {
  opts.validate();
  ModelTriplet model(resolve_architecture(opts.arch, bundle), opts.train.seed);
  ErmTrainer trainer(model, bundle, opts.train);
  double best = 0.0;
  for (int e = 1; e <= opts.max_epochs; ++e) {
    trainer.run_epoch();
    const auto correct = trainer.train_correctness();
    const double acc =
        static_cast<double>(std::count(correct.begin(), correct.end(), true)) / static_cast<double>(correct.size());
    best = std::max(best, acc);
    if (acc >= opts.gamma) return {split_from_predictions(correct, opts.gamma, e), acc, e};
  }
  throw NumericalError("SP: target accuracy " + std::to_string(opts.gamma) + " not reached within " +
                       std::to_string(opts.max_epochs) + " epochs (best " + std::to_string(best) + ")");
}

std::vector<double> update_weight_vector(const std::vector<double>& c_old, const std::vector<int>& window_sums, int M,
                                         bool cap_at_previous) {
  if (M < 1) throw PreconditionError("weight update: M must be >= 1");
  if (c_old.size() != window_sums.size()) throw PreconditionError("weight update: length mismatch");
  std::vector<double> c(c_old.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const int s = window_sums[i];
    if (s < 0 || s > M) throw PreconditionError("weight update: window sum outside [0, M]");
    double v = c_old[i] - (1.0 - static_cast<double>(s + 1) / M);
    v = std::clamp(v, 0.0, 1.0);
    c[i] = cap_at_previous ? std::min(v, c_old[i]) : v;
  }
  return c;
}

void PredictionHistoryOptions::validate() const {
  if (M < 1) throw ConfigError("PH: M must be >= 1");
  if (epochs < 1) throw ConfigError("PH: epochs must be >= 1");
  train.validate();
}

BiasSplit split_from_history(const PredictionHistory& history, nlohmann::json params) {
  const auto rank = history.ranking();
  std::vector<bool> unbias(rank.size());
  for (std::size_t i = 0; i < rank.size(); ++i) unbias[i] = rank[i] == 0;
  return BiasSplit::from_mask(unbias, SplitMethod::kPredictionHistory, std::move(params),
                              static_cast<int>(history.epochs()));
}

PredictionHistoryResult split_by_prediction_history(const DatasetBundle& bundle,
                                                    const PredictionHistoryOptions& opts) {
  opts.validate();
  ModelTriplet model(resolve_architecture(opts.arch, bundle), opts.train.seed);
  ErmTrainer trainer(model, bundle, opts.train);
  PredictionHistoryResult r;
  r.history = PredictionHistory(bundle.train.size());
  r.weights.assign(bundle.train.size(), 1.0);
  for (int e = 1; e <= opts.epochs; ++e) {
    r.train_loss.push_back(trainer.run_epoch(&r.weights));
    r.history.append_epoch(trainer.train_correctness());
    if (e % opts.M == 0) {
      const auto sums = r.history.window_sums(static_cast<std::size_t>(e - opts.M), static_cast<std::size_t>(e));
      r.weights = update_weight_vector(r.weights, sums, opts.M, opts.cap_weights);
    }
  }
  r.split = split_from_history(r.history, {{"M", opts.M}, {"cap_weights", opts.cap_weights}});
  if (r.split.bias_indices.empty()) {
    throw NumericalError("PH: every sample is in the leftmost bin (never classified correctly); train for more epochs");
  }
  return r;
}

BiasSplit make_random_split(std::size_t n, double bias_fraction, std::uint64_t seed) {
  if (!(bias_fraction > 0.0 && bias_fraction < 1.0)) throw PreconditionError("random split: fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, streams::kSplit);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_bias = static_cast<std::size_t>(std::llround(bias_fraction * static_cast<double>(n)));
  std::vector<bool> unbias(n, false);
  for (std::size_t k = n_bias; k < n; ++k) unbias[order[k]] = true;
  return BiasSplit::from_mask(unbias, SplitMethod::kRandom, {{"bias_fraction", bias_fraction}, {"seed", seed}});
}

BiasSplit make_oracle_split(const std::vector<bool>& aligned) {
  std::vector<bool> unbias(aligned.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) unbias[i] = !aligned[i];
  return BiasSplit::from_mask(unbias, SplitMethod::kOracle);
}

}  // namespace debiasmix
