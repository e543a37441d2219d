#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "debiasmix/dataset.hpp"
#include "debiasmix/debias.hpp"
#include "debiasmix/split.hpp"

namespace debiasmix {

struct DatasetSection {
  // External bundle directory; when unset the generator section is used.
  std::optional<std::string> bundle_path;
  GeneratorConfig generator{};
};

struct IdentificationSection {
  SplitMethod method = SplitMethod::kPredictionHistory;
  double gamma = 0.85;      // SP target accuracy
  int max_epochs = 50;      // SP epoch cap
  int M = 5;                // PH refresh period
  int epochs = 20;          // PH K
  bool cap_weights = true;  // PH: c_new <= c_old
  double lr = 3e-4;
  std::size_t batch_size = 256;
  // Random split: bias fraction; unset matches the PH split size.
  std::optional<double> random_bias_fraction;
  // Offsets the model seed of the identification network.
  std::uint64_t seed_offset = 0;
};

struct EvaluationSection {
  std::vector<std::string> report_formats{"csv", "json", "svg"};
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetSection dataset{};
  IdentificationSection identification{};
  DebiasConfig training{};
  EvaluationSection evaluation{};

  // Throws ConfigError on any invalid value.
  void validate() const;
};

// Fully resolved: every field is written, defaults included.
nlohmann::json to_json(const ExperimentConfig& c);
// Unknown keys and ill-typed values raise ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace debiasmix
