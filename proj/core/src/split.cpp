#include "debiasmix/split.hpp"

#include <algorithm>

#include "debiasmix/errors.hpp"
#include "debiasmix/io.hpp"

namespace debiasmix {

std::string to_string(SplitMethod m) {
  switch (m) {
    case SplitMethod::kSinglePrediction:
      return "SP";
    case SplitMethod::kPredictionHistory:
      return "PH";
    case SplitMethod::kOracle:
      return "ORACLE";
    case SplitMethod::kRandom:
      return "RANDOM";
  }
  return "?";
}

SplitMethod split_method_from_string(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (u == "SP") return SplitMethod::kSinglePrediction;
  if (u == "PH") return SplitMethod::kPredictionHistory;
  if (u == "ORACLE") return SplitMethod::kOracle;
  if (u == "RANDOM") return SplitMethod::kRandom;
  throw ConfigError("unknown split method '" + s + "' (expected SP, PH, oracle or random)");
}

double BiasSplit::unbias_fraction() const {
  return size() == 0 ? 0.0 : static_cast<double>(unbias_indices.size()) / static_cast<double>(size());
}

std::vector<bool> BiasSplit::unbias_mask() const {
  std::vector<bool> mask(size(), false);
  for (auto i : unbias_indices) {
    if (i >= mask.size()) throw PreconditionError("split: index out of range");
    mask[i] = true;
  }
  return mask;
}

void BiasSplit::validate(std::size_t n) const {
  if (size() != n) {
    throw PreconditionError("split covers " + std::to_string(size()) + " indices, dataset has " + std::to_string(n));
  }
  std::vector<char> seen(n, 0);
  for (const auto* set : {&bias_indices, &unbias_indices}) {
    if (!std::is_sorted(set->begin(), set->end())) throw PreconditionError("split: index lists must be sorted");
    for (auto i : *set) {
      if (i >= n) throw PreconditionError("split: index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw PreconditionError("split: index " + std::to_string(i) + " assigned twice");
    }
  }
}

BiasSplit BiasSplit::from_mask(const std::vector<bool>& unbias, SplitMethod method, nlohmann::json params,
                               int epochs) {
  BiasSplit s;
  for (std::size_t i = 0; i < unbias.size(); ++i) (unbias[i] ? s.unbias_indices : s.bias_indices).push_back(i);
  s.method = method;
  s.params = params.is_null() ? nlohmann::json::object() : std::move(params);
  s.epochs = epochs;
  return s;
}

nlohmann::json to_json(const BiasSplit& split) {
  return {{"schema_version", io::kSchemaVersion},
          {"method", to_string(split.method)},
          {"params", split.params},
          {"K", split.epochs},
          {"bias_indices", split.bias_indices},
          {"unbias_indices", split.unbias_indices}};
}

BiasSplit split_from_json(const nlohmann::json& j) {
  io::check_schema(j, "split");
  try {
    BiasSplit s;
    s.method = split_method_from_string(j.at("method").get<std::string>());
    s.params = j.at("params");
    s.epochs = j.at("K").get<int>();
    s.bias_indices = j.at("bias_indices").get<std::vector<std::size_t>>();
    s.unbias_indices = j.at("unbias_indices").get<std::vector<std::size_t>>();
    s.validate(s.size());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("split: ") + e.what());
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("split: ") + e.what());
  }
}

void save_split(const BiasSplit& split, const std::filesystem::path& path) { io::write_json(path, to_json(split)); }

BiasSplit load_split(const std::filesystem::path& path) { return split_from_json(io::read_json(path)); }

}  // namespace debiasmix
