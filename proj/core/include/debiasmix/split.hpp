#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace debiasmix {

enum class SplitMethod { kSinglePrediction, kPredictionHistory, kOracle, kRandom };

std::string to_string(SplitMethod m);
SplitMethod split_method_from_string(const std::string& s);

// Pseudo-label partition of the training indices [0, N) into an estimated
// bias-aligned subset and an estimated bias-conflicting subset.
struct BiasSplit {
  std::vector<std::size_t> bias_indices;
  std::vector<std::size_t> unbias_indices;
  SplitMethod method = SplitMethod::kOracle;
  nlohmann::json params = nlohmann::json::object();
  int epochs = 0;

  std::size_t size() const { return bias_indices.size() + unbias_indices.size(); }
  // |unbias| / N.
  double unbias_fraction() const;
  // Per-index flag, true for members of the unbias subset.
  std::vector<bool> unbias_mask() const;

  // Throws PreconditionError unless the two sets are disjoint, sorted and
  // together cover [0, n) exactly.
  void validate(std::size_t n) const;

  static BiasSplit from_mask(const std::vector<bool>& unbias, SplitMethod method, nlohmann::json params = {},
                             int epochs = 0);
};

nlohmann::json to_json(const BiasSplit& split);
BiasSplit split_from_json(const nlohmann::json& j);

void save_split(const BiasSplit& split, const std::filesystem::path& path);
BiasSplit load_split(const std::filesystem::path& path);

}  // namespace debiasmix
