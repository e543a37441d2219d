#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace debiasmix {

// N x K correctness matrix S (s_i^t = 1 iff sample i was classified
// correctly after epoch t), grown one epoch column at a time.
class PredictionHistory {
 public:
  PredictionHistory() = default;
  explicit PredictionHistory(std::size_t num_samples) : num_samples_(num_samples) {}

  std::size_t num_samples() const { return num_samples_; }
  std::size_t epochs() const { return columns_.size(); }

  void append_epoch(const std::vector<bool>& correct);
  bool at(std::size_t i, std::size_t t) const { return columns_.at(t).at(i); }
  const std::vector<bool>& column(std::size_t t) const { return columns_.at(t); }

  // Per-sample count of correct epochs over [first, last).
  std::vector<int> window_sums(std::size_t first, std::size_t last) const;
  // Ranking vector over all recorded epochs.
  std::vector<int> ranking() const { return window_sums(0, epochs()); }
  // Fraction of samples correct at epoch t.
  double accuracy(std::size_t t) const;

  bool operator==(const PredictionHistory&) const = default;

 private:
  std::size_t num_samples_ = 0;
  std::vector<std::vector<bool>> columns_;
};

// history.json (header with N, K, checksum) + history.bin (packed bits,
// row-major over samples, LSB first).
void save_history(const PredictionHistory& h, const std::filesystem::path& dir);
PredictionHistory load_history(const std::filesystem::path& dir);

}  // namespace debiasmix
