#include "debiasmix/diagnostics.hpp"

#include <cmath>

#include "debiasmix/errors.hpp"

namespace debiasmix {

SplitQuality split_quality(const BiasSplit& split, const std::vector<bool>& aligned) {
  if (aligned.empty()) throw PreconditionError("split quality: ground truth is absent");
  if (aligned.size() != split.size()) throw PreconditionError("split quality: ground truth length mismatch");
  const auto predicted = split.unbias_mask();
  std::size_t tp = 0, pp = 0, ap = 0;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const bool truth = !aligned[i];
    tp += predicted[i] && truth;
    pp += predicted[i];
    ap += truth;
  }
  SplitQuality q;
  q.precision = pp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pp);
  q.recall = ap == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(ap);
  q.f1 = (q.precision + q.recall) == 0 ? 0.0 : 2 * q.precision * q.recall / (q.precision + q.recall);
  return q;
}

double random_split_f1(std::size_t n, std::size_t predicted_unbias, std::size_t true_unbias) {
  if (n == 0 || predicted_unbias + true_unbias == 0) return 0.0;
  const double k = static_cast<double>(predicted_unbias);
  const double m = static_cast<double>(true_unbias);
  const double tp = k * m / static_cast<double>(n);
  return 2.0 * tp / (k + m);
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw PreconditionError("pearson: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

std::vector<std::optional<double>> bias_correlation(const PredictionHistory& history,
                                                    const std::vector<bool>& aligned) {
  if (aligned.empty()) throw PreconditionError("bias correlation: ground truth is absent");
  if (aligned.size() != history.num_samples()) throw PreconditionError("bias correlation: length mismatch");
  const std::vector<double> truth(aligned.begin(), aligned.end());
  std::vector<std::optional<double>> out;
  for (std::size_t t = 0; t < history.epochs(); ++t) {
    const auto& col = history.column(t);
    out.push_back(pearson(std::vector<double>(col.begin(), col.end()), truth));
  }
  return out;
}

std::vector<std::size_t> ranking_histogram(const std::vector<int>& ranking, int K) {
  if (K < 0) throw PreconditionError("histogram: K must be non-negative");
  std::vector<std::size_t> bins(static_cast<std::size_t>(K) + 1, 0);
  for (int r : ranking) {
    if (r < 0 || r > K) throw PreconditionError("histogram: ranking value outside [0, K]");
    ++bins[static_cast<std::size_t>(r)];
  }
  return bins;
}

}  // namespace debiasmix
