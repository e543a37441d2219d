#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "debiasmix/autograd.hpp"
#include "debiasmix/rng.hpp"

namespace debiasmix {

struct NamedParameter {
  std::string name;
  ag::Var var;
};

using ParameterList = std::vector<NamedParameter>;

std::vector<ag::Var> vars_of(const ParameterList& params);

class Linear {
 public:
  // Weights and bias drawn from U(-1/sqrt(in), 1/sqrt(in)).
  Linear(ag::Index in_dim, ag::Index out_dim, Rng& rng);

  ag::Var forward(const ag::Var& x) const;
  ag::Index in_dim() const { return weight_.rows(); }
  ag::Index out_dim() const { return weight_.cols(); }

  void append_parameters(const std::string& prefix, ParameterList& out) const;

 private:
  ag::Var weight_;  // in x out
  ag::Var bias_;    // 1 x out
};

// Fully connected stack with ReLU between layers. `widths` includes the
// input and output sizes.
class Mlp {
 public:
  Mlp(const std::vector<ag::Index>& widths, bool relu_on_output, Rng& rng);

  ag::Var forward(const ag::Var& x) const;
  ag::Index in_dim() const;
  ag::Index out_dim() const;
  ParameterList parameters(const std::string& prefix) const;

 private:
  std::vector<Linear> layers_;
  bool relu_on_output_;
};

struct ArchitectureConfig {
  ag::Index input_dim = 0;
  std::vector<ag::Index> backbone_hidden{128};
  ag::Index feature_dim = 64;
  std::vector<ag::Index> classifier_hidden{};
  ag::Index num_classes = 0;
  std::vector<ag::Index> beta_hidden{64, 64};
  double beta_floor = 1e-4;

  void validate() const;
  bool operator==(const ArchitectureConfig&) const = default;
};

void to_json(nlohmann::json& j, const ArchitectureConfig& a);
void from_json(const nlohmann::json& j, ArchitectureConfig& a);

// f_theta: flattened input -> feature vector.
class FeatureExtractor {
 public:
  FeatureExtractor(const ArchitectureConfig& arch, Rng& rng);

  ag::Var forward(const ag::Var& x) const;
  ag::Index input_dim() const { return net_.in_dim(); }
  ag::Index feature_dim() const { return net_.out_dim(); }
  ParameterList parameters() const { return net_.parameters("features"); }

 private:
  Mlp net_;
};

// g_phi: features -> logits.
class Classifier {
 public:
  Classifier(const ArchitectureConfig& arch, Rng& rng);

  ag::Var forward(const ag::Var& features) const;
  ag::Index num_classes() const { return net_.out_dim(); }
  ParameterList parameters() const { return net_.parameters("classifier"); }

 private:
  Mlp net_;
};

// Per-pair Beta distribution parameters, each (B x 1) and strictly positive.
struct BetaParams {
  ag::Var alpha;
  ag::Var beta;
};

// Maps raw network outputs (B x 2) to softplus(raw) + floor.
BetaParams beta_params_from_raw(const ag::Var& raw, double floor);

// h_psi: concatenated (detached) feature pair -> BetaParams.
class BetaParamNet {
 public:
  BetaParamNet(const ArchitectureConfig& arch, Rng& rng);

  // Inputs pass through stop_gradient: no gradient reaches the producer of
  // feat1/feat2.
  BetaParams forward(const ag::Var& feat1, const ag::Var& feat2) const;
  ag::Var raw(const ag::Var& feat1, const ag::Var& feat2) const;
  double floor() const { return floor_; }
  ParameterList parameters() const { return net_.parameters("beta_net"); }

 private:
  Mlp net_;
  double floor_;
};

class ModelTriplet {
 public:
  ModelTriplet(const ArchitectureConfig& arch, std::uint64_t seed);

  // Parameters are shared handles; copies would alias them.
  ModelTriplet(const ModelTriplet&) = delete;
  ModelTriplet& operator=(const ModelTriplet&) = delete;
  ModelTriplet(ModelTriplet&&) = default;
  ModelTriplet& operator=(ModelTriplet&&) = default;

  // Deep copy with independent parameter storage.
  ModelTriplet clone() const;

  const ArchitectureConfig& arch() const { return arch_; }
  FeatureExtractor& features() { return features_; }
  const FeatureExtractor& features() const { return features_; }
  Classifier& classifier() { return classifier_; }
  const Classifier& classifier() const { return classifier_; }
  BetaParamNet& beta_net() { return beta_net_; }
  const BetaParamNet& beta_net() const { return beta_net_; }

  // g_phi(f_theta(x)).
  ag::Var logits(const ag::Var& x) const;
  ag::Matrix logits(const ag::Matrix& x) const;

  ParameterList classification_parameters() const;  // theta and phi
  ParameterList all_parameters() const;             // theta, phi and psi

 private:
  ModelTriplet(const ArchitectureConfig& arch, Rng rng);

  ArchitectureConfig arch_;
  FeatureExtractor features_;
  Classifier classifier_;
  BetaParamNet beta_net_;
};

// Checkpoint directory: checkpoint.json (architecture, parameter table,
// checksum) + checkpoint.bin (row-major float64 parameter values).
void save_checkpoint(const ModelTriplet& model, const std::filesystem::path& dir);
ModelTriplet load_checkpoint(const std::filesystem::path& dir);

}  // namespace debiasmix
