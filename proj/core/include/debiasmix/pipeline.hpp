#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "debiasmix/config.hpp"
#include "debiasmix/dataset.hpp"
#include "debiasmix/debias.hpp"
#include "debiasmix/history.hpp"
#include "debiasmix/split.hpp"

namespace debiasmix {

// Generates from the config's generator section (seeded by config.seed) or
// loads the configured bundle directory.
DatasetBundle resolve_bundle(const ExperimentConfig& config);

struct IdentificationOutput {
  BiasSplit split;
  std::optional<PredictionHistory> history;  // PH only
  nlohmann::json info = nlohmann::json::object();
};

// Stage 1 for any split method. The random split without an explicit
// fraction matches the size of the PH split computed with the same options.
IdentificationOutput identify(const DatasetBundle& bundle, const IdentificationSection& section, std::uint64_t seed);

// Stage 1 followed by stage 2; the manifest records both.
RunManifest run_experiment(const DatasetBundle& bundle, const ExperimentConfig& config);

struct AblationRun {
  std::string value;
  std::optional<RunManifest> manifest;
  std::optional<std::string> error;
};

struct AblationGrid {
  std::string axis;
  std::uint64_t seed = 0;
  std::vector<AblationRun> runs;
};

inline const std::vector<std::string>& ablation_axes() {
  static const std::vector<std::string> axes{"gamma", "M", "zeta", "omega", "strategy", "split_method"};
  return axes;
}

// Copy of `base` with one axis set to `value`. gamma targets the SP
// threshold (and selects SP); M selects PH.
ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis, const nlohmann::json& value);

// One run per value, all with base.seed. A failing run is recorded and the
// grid continues. Stage 1 is shared across values of training-only axes.
AblationGrid run_ablation(const DatasetBundle& bundle, const std::string& axis, const std::vector<nlohmann::json>& values,
                          const ExperimentConfig& base);

// grid.json plus one run_<k>.json manifest per completed run.
void save_grid(const AblationGrid& grid, const std::filesystem::path& dir);
AblationGrid load_grid(const std::filesystem::path& dir);

}  // namespace debiasmix
