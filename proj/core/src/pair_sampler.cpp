#include "debiasmix/pair_sampler.hpp"

#include <algorithm>
#include <random>

#include "debiasmix/errors.hpp"

namespace debiasmix {

PairSampler::PairSampler(const BiasSplit& split, const DatasetBundle& bundle, std::size_t batch_size,
                         std::uint64_t seed)
    : bundle_(&bundle),
      bias_(split.bias_indices),
      unbias_(split.unbias_indices),
      batch_size_(batch_size),
      rng_(make_rng(seed, streams::kPairs)) {
  if (batch_size == 0) throw PreconditionError("pair sampler: batch size must be positive");
  if (unbias_.empty()) {
    throw PreconditionError("pair sampler: the unbias split is empty; fall back to vanilla (ERM) training");
  }
  if (bias_.empty()) throw PreconditionError("pair sampler: the bias split is empty");
  split.validate(bundle.train.size());
  bias_is_larger_ = bias_.size() >= unbias_.size();
}

std::size_t PairSampler::batches_per_epoch() const {
  const std::size_t n = std::max(bias_.size(), unbias_.size());
  return (n + batch_size_ - 1) / batch_size_;
}

void PairSampler::start_epoch() {
  order_ = bias_is_larger_ ? bias_ : unbias_;
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

PairBatch PairSampler::next() {
  if (cursor_ == 0) start_epoch();
  started_ = true;
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  std::vector<std::size_t> major(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  const auto& pool = bias_is_larger_ ? unbias_ : bias_;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> minor(major.size());
  for (auto& i : minor) i = pool[pick(rng_)];
  cursor_ = end == order_.size() ? 0 : end;

  PairBatch b;
  b.idx1 = bias_is_larger_ ? std::move(major) : std::move(minor);
  b.idx2 = bias_is_larger_ ? std::move(minor) : std::move(major);
  const auto& train = bundle_->train;
  b.x1 = gather_features(train, b.idx1);
  b.x2 = gather_features(train, b.idx2);
  b.y1 = one_hot(gather_labels(train, b.idx1), bundle_->num_classes);
  b.y2 = one_hot(gather_labels(train, b.idx2), bundle_->num_classes);
  return b;
}

}  // namespace debiasmix
