#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "debiasmix/dataset.hpp"
#include "debiasmix/diagnostics.hpp"
#include "debiasmix/evaluation.hpp"
#include "debiasmix/mixing.hpp"
#include "debiasmix/models.hpp"
#include "debiasmix/split.hpp"

namespace debiasmix {

enum class DebiasMethod { kErm, kSMix, kLMix };

std::string to_string(DebiasMethod m);
DebiasMethod debias_method_from_string(const std::string& s);

struct DebiasConfig {
  DebiasMethod method = DebiasMethod::kLMix;
  int epochs = 30;
  double lr = 1e-3;
  std::size_t batch_size = 256;
  SMixConfig smix{};
  LMixConfig lmix{};
  ArchitectureConfig arch{};

  void validate() const;
};

void to_json(nlohmann::json& j, const DebiasConfig& c);
void from_json(const nlohmann::json& j, DebiasConfig& c);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // mean optimization objective over the epoch's steps
  double train_acc = 0.0;   // full pass after the epoch
  double acc_all = 0.0;
  std::optional<double> acc_unbiased;
  // Mean full-pass CE over ground-truth aligned / conflicting training samples.
  std::optional<double> loss_aligned;
  std::optional<double> loss_conflicting;
  // l-mix only: mean alpha / (alpha + beta) over the epoch's pairs.
  std::optional<double> beta_mean;

  bool operator==(const EpochMetrics&) const = default;
};

struct RunManifest {
  std::string run_id;
  std::string method;
  // Set for members of an ablation grid.
  std::string axis;
  std::string value;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  nlohmann::json split = nlohmann::json::object();  // provenance and quality
  std::vector<EpochMetrics> epochs;
  GroupAccuracies final_metrics;
  std::vector<std::string> warnings;
  nlohmann::json artifacts = nlohmann::json::object();
  double wall_time = 0.0;  // seconds
  std::string started_at;
  std::string finished_at;

  // Everything except wall time and timestamps.
  nlohmann::json deterministic_view() const;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const nlohmann::json& j);
void save_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

struct DebiasResult {
  ModelTriplet model;
  RunManifest manifest;
};

// Trains from scratch on the bundle's training partition with the given
// pseudo split. An empty unbias subset falls back to plain ERM with a
// warning recorded in the manifest.
DebiasResult train_debiased(const DatasetBundle& bundle, const BiasSplit& split, const DebiasConfig& cfg,
                            std::uint64_t seed);

}  // namespace debiasmix
