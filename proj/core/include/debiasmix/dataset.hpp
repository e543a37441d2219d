#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "debiasmix/autograd.hpp"

namespace debiasmix {

struct Sample {
  std::size_t index = 0;
  std::vector<float> features;
  int class_label = 0;
  std::optional<int> bias_domain;  // ground truth; evaluation only

  bool operator==(const Sample&) const = default;
};

struct ImageShape {
  int channels = 3;
  int height = 8;
  int width = 8;

  std::size_t flat_size() const { return static_cast<std::size_t>(channels) * height * width; }
  bool operator==(const ImageShape&) const = default;
};

// Parameters of the synthetic generator. Each class owns a random template
// image; each domain applies a fixed, class-independent corruption (channel
// tint plus texture) scaled by corruption_strength.
struct GeneratorConfig {
  int num_classes = 5;
  int n_per_class = 400;
  double rho = 0.95;
  double corruption_strength = 1.0;
  int image_size = 8;
  int channels = 3;
  int test_per_cell = 40;
  double class_signal = 0.3;  // template amplitude
  double noise_std = 1.0;     // per-pixel sample noise
  double texture_std = 0.3;   // amplitude of each domain's texture
  // Per-sample corruption severity ~ U(1 - jitter, 1 + jitter).
  double severity_jitter = 0.0;
  std::uint64_t appearance_seed = 1234;  // templates, tints and textures

  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

struct DatasetBundle {
  std::vector<Sample> train;
  std::vector<Sample> test;
  int num_classes = 0;
  int num_domains = 0;
  double rho = 1.0;
  ImageShape shape;
  // privileged_domain[c] is the domain class c co-occurs with when aligned.
  std::vector<int> privileged_domains;
  std::optional<GeneratorConfig> generator;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  std::size_t feature_dim() const { return shape.flat_size(); }
  bool has_ground_truth() const;

  bool operator==(const DatasetBundle&) const = default;
};

// Bias-aligned flag per sample: domain equals its class's privileged domain.
// Throws PreconditionError when any sample lacks a domain.
std::vector<bool> aligned_flags(const DatasetBundle& bundle, std::span<const Sample> samples);
std::vector<bool> train_aligned_flags(const DatasetBundle& bundle);

DatasetBundle generate_synthetic_biased(const GeneratorConfig& config, std::uint64_t seed);

// Wraps externally produced arrays (row-major N x flat features) into a
// bundle. Domains may be absent.
struct ExternalPartition {
  std::vector<float> features;
  std::vector<int> labels;
  std::optional<std::vector<int>> domains;
};
DatasetBundle ingest_arrays(const ExternalPartition& train, const ExternalPartition& test, ImageShape shape,
                            int num_classes, int num_domains, std::vector<int> privileged_domains = {});

// Directory layout: manifest.json + train.bin + test.bin (row-major float32).
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir);

// Batch helpers.
ag::Matrix gather_features(std::span<const Sample> samples, std::span<const std::size_t> indices);
ag::Matrix all_features(std::span<const Sample> samples);
ag::Matrix one_hot(std::span<const int> labels, int num_classes);
std::vector<int> gather_labels(std::span<const Sample> samples, std::span<const std::size_t> indices);
std::vector<int> all_labels(std::span<const Sample> samples);

}  // namespace debiasmix
