#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "debiasmix/dataset.hpp"
#include "debiasmix/history.hpp"
#include "debiasmix/models.hpp"
#include "debiasmix/split.hpp"
#include "debiasmix/training.hpp"

namespace debiasmix {

struct SinglePredictionOptions {
  double gamma = 0.85;  // target training accuracy
  int max_epochs = 50;
  TrainOptions train{};
  ArchitectureConfig arch{};

  void validate() const;
};

struct SinglePredictionResult {
  BiasSplit split;
  double achieved_accuracy = 0.0;
  int epochs = 0;
};

// Trains plain ERM until the full-pass training accuracy reaches gamma, then
// assigns the correctly classified samples of that same pass to the bias
// subset. Throws NumericalError when max_epochs elapse first.
SinglePredictionResult split_by_single_prediction(const DatasetBundle& bundle, const SinglePredictionOptions& opts);

// Classifies with an already trained model (one full pass).
BiasSplit split_from_predictions(const std::vector<bool>& correct, double gamma, int epochs);

// c_new = clip(c_old - (1 - (sum + 1) / M), 0, 1), additionally capped at
// c_old unless `cap_at_previous` is false.
std::vector<double> update_weight_vector(const std::vector<double>& c_old, const std::vector<int>& window_sums, int M,
                                         bool cap_at_previous = true);

struct PredictionHistoryOptions {
  int M = 5;            // weight refresh period
  int epochs = 20;      // K
  bool cap_weights = true;
  TrainOptions train{};
  ArchitectureConfig arch{};

  void validate() const;
};

struct PredictionHistoryResult {
  BiasSplit split;
  PredictionHistory history;
  std::vector<double> weights;  // final c
  std::vector<double> train_loss;
};

// Weighted ERM for K epochs, refreshing c every M epochs from the last
// window; samples never classified correctly form the unbias subset.
// Throws NumericalError when every sample lands in that leftmost bin.
PredictionHistoryResult split_by_prediction_history(const DatasetBundle& bundle, const PredictionHistoryOptions& opts);

// unbias = { i : ranking_i == 0 }.
BiasSplit split_from_history(const PredictionHistory& history, nlohmann::json params = {});

// round(fraction * N) samples go to the bias subset.
BiasSplit make_random_split(std::size_t n, double bias_fraction, std::uint64_t seed);
// unbias = not aligned.
BiasSplit make_oracle_split(const std::vector<bool>& aligned);

}  // namespace debiasmix
