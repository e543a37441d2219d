#include "debiasmix/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "debiasmix/errors.hpp"

namespace debiasmix {

void TrainOptions::validate() const {
  if (epochs < 1) throw ConfigError("training: epochs must be >= 1");
  if (!(lr > 0)) throw ConfigError("training: learning rate must be positive");
  if (batch_size == 0) throw ConfigError("training: batch size must be positive");
}

ArchitectureConfig resolve_architecture(ArchitectureConfig arch, const DatasetBundle& bundle) {
  arch.input_dim = static_cast<ag::Index>(bundle.feature_dim());
  arch.num_classes = bundle.num_classes;
  arch.validate();
  return arch;
}

std::vector<int> predict(const ModelTriplet& model, const ag::Matrix& x) {
  constexpr ag::Index kChunk = 1024;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (ag::Index start = 0; start < x.rows(); start += kChunk) {
    const ag::Index n = std::min(kChunk, x.rows() - start);
    const ag::Matrix logits = model.logits(ag::Matrix(x.middleRows(start, n)));
    for (ag::Index r = 0; r < n; ++r) {
      ag::Index best = 0;
      logits.row(r).maxCoeff(&best);
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

std::vector<bool> correctness(const ModelTriplet& model, std::span<const Sample> samples) {
  const auto pred = predict(model, all_features(samples));
  std::vector<bool> ok(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) ok[i] = pred[i] == samples[i].class_label;
  return ok;
}

ErmTrainer::ErmTrainer(ModelTriplet& model, const DatasetBundle& bundle, const TrainOptions& opts)
    : model_(model),
      bundle_(bundle),
      opts_(opts),
      optimizer_(vars_of(model.classification_parameters()), AdamOptions{.lr = opts.lr}),
      rng_(make_rng(opts.seed, streams::kShuffle)),
      features_(all_features(bundle.train)),
      targets_(one_hot(all_labels(bundle.train), bundle.num_classes)) {
  opts_.validate();
  if (bundle.train.empty()) throw PreconditionError("training: empty training partition");
}

double ErmTrainer::run_epoch(const std::vector<double>* weights) {
  const std::size_t n = bundle_.train.size();
  if (weights && weights->size() != n) throw PreconditionError("training: weight vector length mismatch");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += opts_.batch_size) {
    const std::size_t end = std::min(n, start + opts_.batch_size);
    const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
    Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<ag::Index>(idx.size()));
    if (weights) {
      for (std::size_t r = 0; r < idx.size(); ++r) w(static_cast<ag::Index>(r)) = (*weights)[idx[r]];
    }
    const ag::Var x(features_(idx, Eigen::all));
    const ag::Matrix y = targets_(idx, Eigen::all);
    optimizer_.zero_grad();
    const ag::Var loss = ag::weighted_softmax_cross_entropy(model_.logits(x), y, w);
    if (!std::isfinite(loss.item())) {
      throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epochs_run_ + 1) +
                           ", batch " + std::to_string(batches + 1));
    }
    loss.backward();
    optimizer_.step();
    total += loss.item();
    ++batches;
  }
  ++epochs_run_;
  return total / static_cast<double>(batches);
}

std::vector<bool> ErmTrainer::train_correctness() const { return correctness(model_, bundle_.train); }

ErmResult train_erm(ModelTriplet& model, const DatasetBundle& bundle, const TrainOptions& opts,
                    const std::vector<double>* weights) {
  opts.validate();
  ErmTrainer trainer(model, bundle, opts);
  ErmResult result{PredictionHistory(bundle.train.size()), {}};
  for (int e = 0; e < opts.epochs; ++e) {
    result.train_loss.push_back(trainer.run_epoch(weights));
    result.history.append_epoch(trainer.train_correctness());
  }
  return result;
}

}  // namespace debiasmix
