#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "debiasmix/autograd.hpp"
#include "debiasmix/dataset.hpp"
#include "debiasmix/models.hpp"
#include "debiasmix/optim.hpp"
#include "debiasmix/pair_sampler.hpp"
#include "debiasmix/rng.hpp"
#include "debiasmix/split.hpp"

namespace debiasmix {

struct MixBatch {
  ag::Matrix x_mix;
  ag::Matrix y_mix;
  Eigen::VectorXd lambda;
};

// x_mix = lambda * x1 + (1 - lambda) * x2 per row, same for labels.
// Throws PreconditionError if any lambda lies outside [0, 1].
MixBatch mix_pair(const ag::Matrix& x1, const ag::Matrix& y1, const ag::Matrix& x2, const ag::Matrix& y2,
                  const Eigen::VectorXd& lambda);

// Differentiable variant with lambda as a (B x 1) Var.
ag::Var mix_rows(const ag::Var& a, const ag::Var& b, const ag::Var& lambda);

// (1 - gamma) * CE(bias stream) + gamma * CE(unbias stream).
ag::Var weighted_erm_loss(const PairBatch& batch, const ModelTriplet& model, double gamma);

enum class MixStrategy { kBiasUnbias, kBiasBias, kUnbiasUnbias, kVanilla, kNone };

std::string to_string(MixStrategy s);
MixStrategy mix_strategy_from_string(const std::string& s);

struct SMixConfig {
  double alpha = 1.0;
  double beta = 1.0;
  // Weight of the unbias-stream loss; unset means |bias| / N of the split.
  std::optional<double> gamma;
  double zeta = 10.0;
  MixStrategy strategy = MixStrategy::kBiasUnbias;

  void validate() const;
};

void to_json(nlohmann::json& j, const SMixConfig& c);
void from_json(const nlohmann::json& j, SMixConfig& c);

// Chooses the two mixup inputs for a pair batch according to the strategy,
// resampling partners from the split (or the whole training set for
// vanilla) as needed.
class MixPartnerSource {
 public:
  MixPartnerSource(const DatasetBundle& bundle, const BiasSplit& split);

  struct Inputs {
    ag::Matrix xa, ya, xb, yb;
  };
  Inputs select(const PairBatch& batch, MixStrategy strategy, Rng& rng) const;

 private:
  ag::Matrix gather_x(const std::vector<std::size_t>& idx) const;
  ag::Matrix gather_y(const std::vector<std::size_t>& idx) const;
  std::vector<std::size_t> resample(const std::vector<std::size_t>& pool, std::size_t n, Rng& rng) const;

  const DatasetBundle* bundle_;
  std::vector<std::size_t> bias_;
  std::vector<std::size_t> unbias_;
  std::vector<std::size_t> all_;
};

struct SMixLosses {
  ag::Var erm;    // weighted ERM
  ag::Var mix;    // CE on the mixed batch (zero for the "none" strategy)
  ag::Var total;  // erm + zeta * mix
  Eigen::VectorXd lambda;
};

// Lambda ~ Beta(alpha, beta) per pair, drawn with the same sampler as l-mix.
SMixLosses s_mix_loss(const PairBatch& batch, const ModelTriplet& model, const SMixConfig& cfg, double gamma,
                      const MixPartnerSource& partners, Rng& rng);

// Loss evaluation, backward pass and one optimizer step on theta and phi.
SMixLosses s_mix_step(const PairBatch& batch, ModelTriplet& model, Adam& optimizer, const SMixConfig& cfg,
                      double gamma, const MixPartnerSource& partners, Rng& rng);

// mean_i (alpha_i / (alpha_i + beta_i) - target)^2.
ag::Var beta_mean_regularizer(const BetaParams& params, double target_ratio);

struct LMixConfig {
  double omega = 1e-3;
  // false: reversal only on the path into the lambda sampler, so psi ascends
  // CE and descends omega * Reg. true: reversal before both terms.
  bool literal_grl = false;
  bool grl_enabled = true;
  // Replaces h_psi's output with constants (diagnostics only).
  std::optional<std::pair<double, double>> fixed_beta;

  void validate() const;
};

void to_json(nlohmann::json& j, const LMixConfig& c);
void from_json(const nlohmann::json& j, LMixConfig& c);

struct LMixLosses {
  ag::Var ce;
  ag::Var reg;
  ag::Var total;  // ce + omega * reg
  BetaParams params;
  ag::Var lambda;
};

LMixLosses l_mix_loss(const PairBatch& batch, const ModelTriplet& model, const LMixConfig& cfg, double target_ratio,
                      Rng& rng);

// One joint step on theta, phi and psi. `optimizer` must own all three sets.
// Throws NumericalError on a non-finite loss.
LMixLosses l_mix_training_step(const PairBatch& batch, ModelTriplet& model, Adam& optimizer, const LMixConfig& cfg,
                               double target_ratio, Rng& rng);

}  // namespace debiasmix
