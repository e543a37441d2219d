#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "debiasmix/autograd.hpp"
#include "debiasmix/dataset.hpp"
#include "debiasmix/history.hpp"
#include "debiasmix/models.hpp"
#include "debiasmix/optim.hpp"
#include "debiasmix/rng.hpp"

namespace debiasmix {

struct TrainOptions {
  int epochs = 20;
  double lr = 1e-3;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fills input_dim and num_classes from the bundle.
ArchitectureConfig resolve_architecture(ArchitectureConfig arch, const DatasetBundle& bundle);

// Row index of the arg-max logit, evaluated in chunks.
std::vector<int> predict(const ModelTriplet& model, const ag::Matrix& x);
std::vector<bool> correctness(const ModelTriplet& model, std::span<const Sample> samples);

// Mini-batch ERM on the training partition, optionally with per-sample loss
// weights c_i (loss = mean_i c_i * CE_i over the batch).
class ErmTrainer {
 public:
  ErmTrainer(ModelTriplet& model, const DatasetBundle& bundle, const TrainOptions& opts);

  // One shuffled pass. `weights` must hold one entry per training sample.
  // Returns the mean batch loss; throws NumericalError on a non-finite loss.
  double run_epoch(const std::vector<double>* weights = nullptr);

  // Full forward pass over the training partition.
  std::vector<bool> train_correctness() const;

  int epochs_run() const { return epochs_run_; }

 private:
  ModelTriplet& model_;
  const DatasetBundle& bundle_;
  TrainOptions opts_;
  Adam optimizer_;
  Rng rng_;
  ag::Matrix features_;
  ag::Matrix targets_;
  int epochs_run_ = 0;
};

struct ErmResult {
  PredictionHistory history;
  std::vector<double> train_loss;  // per epoch
};

// Runs opts.epochs epochs and records one history column per epoch.
ErmResult train_erm(ModelTriplet& model, const DatasetBundle& bundle, const TrainOptions& opts,
                    const std::vector<double>* weights = nullptr);

}  // namespace debiasmix
