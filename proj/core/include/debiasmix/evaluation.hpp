#pragma once

#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "debiasmix/autograd.hpp"
#include "debiasmix/dataset.hpp"
#include "debiasmix/models.hpp"

namespace debiasmix {

// Test accuracies overall and per ground-truth group. The group fields are
// absent when the test set carries no domain labels.
struct GroupAccuracies {
  double acc_all = 0.0;
  std::optional<double> acc_unbiased;
  std::optional<double> acc_biased;
  // C x D cell accuracies (NaN for empty cells) and sample counts.
  std::optional<ag::Matrix> per_cell;
  std::optional<Eigen::MatrixXi> counts;

  bool operator==(const GroupAccuracies&) const;
};

nlohmann::json to_json(const GroupAccuracies& g);
GroupAccuracies group_accuracies_from_json(const nlohmann::json& j);

// Scores fixed predictions against the samples' labels and domains.
GroupAccuracies score_predictions(const DatasetBundle& bundle, std::span<const Sample> samples,
                                  const std::vector<int>& predictions);

GroupAccuracies evaluate(const ModelTriplet& model, const DatasetBundle& bundle);

}  // namespace debiasmix
