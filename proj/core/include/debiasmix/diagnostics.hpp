#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "debiasmix/history.hpp"
#include "debiasmix/split.hpp"

namespace debiasmix {

// Binary P/R/F1 with "unbiased" as the positive class.
struct SplitQuality {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// `aligned` is the ground truth; throws PreconditionError when empty or of
// the wrong length.
SplitQuality split_quality(const BiasSplit& split, const std::vector<bool>& aligned);

// Expected F1 of a uniformly random split that puts `predicted_unbias` of
// `n` samples in the unbias subset when `true_unbias` are truly unbiased.
// Hypergeometric overlap: E[TP] = k * m / n, F1 = 2 TP / (k + m).
double random_split_f1(std::size_t n, std::size_t predicted_unbias, std::size_t true_unbias);

// Pearson correlation; nullopt when either vector has zero variance.
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

// Per-epoch correlation between s^t and the aligned flags.
std::vector<std::optional<double>> bias_correlation(const PredictionHistory& history, const std::vector<bool>& aligned);

// Counts of ranking values 0..K (K + 1 bins).
std::vector<std::size_t> ranking_histogram(const std::vector<int>& ranking, int K);

}  // namespace debiasmix
