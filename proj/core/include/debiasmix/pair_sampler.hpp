#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "debiasmix/autograd.hpp"
#include "debiasmix/dataset.hpp"
#include "debiasmix/rng.hpp"
#include "debiasmix/split.hpp"

namespace debiasmix {

// Stream 1 comes from the bias subset, stream 2 from the unbias subset.
// Labels are one-hot.
struct PairBatch {
  ag::Matrix x1, y1;
  ag::Matrix x2, y2;
  std::vector<std::size_t> idx1, idx2;

  ag::Index size() const { return x1.rows(); }
};

// Single-consumer iterator over PairBatches. Each epoch walks a fresh
// permutation of the larger subset exactly once; the smaller subset is
// resampled with replacement to fill the other stream.
class PairSampler {
 public:
  // Throws PreconditionError when either subset is empty (callers should
  // fall back to vanilla training).
  PairSampler(const BiasSplit& split, const DatasetBundle& bundle, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const;
  std::size_t batch_size() const { return batch_size_; }

  // Next batch of the current epoch; starts a new epoch transparently.
  PairBatch next();
  // True when the previous next() call returned the last batch of an epoch.
  bool epoch_finished() const { return cursor_ == 0 && started_; }

 private:
  void start_epoch();

  const DatasetBundle* bundle_;
  std::vector<std::size_t> bias_;
  std::vector<std::size_t> unbias_;
  std::size_t batch_size_;
  bool bias_is_larger_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  bool started_ = false;
};

}  // namespace debiasmix
