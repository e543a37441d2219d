#include "debiasmix/mixing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "debiasmix/errors.hpp"
#include "debiasmix/reparam.hpp"

namespace debiasmix {

MixBatch mix_pair(const ag::Matrix& x1, const ag::Matrix& y1, const ag::Matrix& x2, const ag::Matrix& y2,
                  const Eigen::VectorXd& lambda) {
  if (x1.rows() != x2.rows() || x1.cols() != x2.cols() || y1.rows() != y2.rows() || y1.cols() != y2.cols() ||
      x1.rows() != y1.rows() || lambda.size() != x1.rows()) {
    throw PreconditionError("mix_pair: shapes do not align");
  }
  for (ag::Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda(i) >= 0.0 && lambda(i) <= 1.0)) throw PreconditionError("mix_pair: lambda outside [0, 1]");
  }
  const Eigen::ArrayXd l = lambda.array();
  const Eigen::ArrayXd m = 1.0 - l;
  MixBatch out;
  out.x_mix = (x1.array().colwise() * l + x2.array().colwise() * m).matrix();
  out.y_mix = (y1.array().colwise() * l + y2.array().colwise() * m).matrix();
  out.lambda = lambda;
  return out;
}

ag::Var mix_rows(const ag::Var& a, const ag::Var& b, const ag::Var& lambda) {
  const ag::Var complement = ag::add_scalar(ag::scale(lambda, -1.0), 1.0);
  return ag::scale_rows(a, lambda) + ag::scale_rows(b, complement);
}

ag::Var weighted_erm_loss(const PairBatch& batch, const ModelTriplet& model, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw PreconditionError("weighted ERM: gamma must lie in (0, 1)");
  const ag::Var bias_loss = ag::softmax_cross_entropy(model.logits(ag::Var(batch.x1)), batch.y1);
  const ag::Var unbias_loss = ag::softmax_cross_entropy(model.logits(ag::Var(batch.x2)), batch.y2);
  return (1.0 - gamma) * bias_loss + gamma * unbias_loss;
}

std::string to_string(MixStrategy s) {
  switch (s) {
    case MixStrategy::kBiasUnbias:
      return "bias-unbias";
    case MixStrategy::kBiasBias:
      return "bias-bias";
    case MixStrategy::kUnbiasUnbias:
      return "unbias-unbias";
    case MixStrategy::kVanilla:
      return "vanilla";
    case MixStrategy::kNone:
      return "none";
  }
  return "?";
}

MixStrategy mix_strategy_from_string(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto m : {MixStrategy::kBiasUnbias, MixStrategy::kBiasBias, MixStrategy::kUnbiasUnbias, MixStrategy::kVanilla,
                 MixStrategy::kNone}) {
    if (l == to_string(m)) return m;
  }
  throw ConfigError("unknown mix strategy '" + s + "'");
}

void SMixConfig::validate() const {
  if (!(alpha > 0) || !(beta > 0)) throw ConfigError("s-mix: alpha and beta must be positive");
  if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) throw ConfigError("s-mix: gamma must lie in (0, 1)");
  if (!(zeta >= 0)) throw ConfigError("s-mix: zeta must be non-negative");
}

void to_json(nlohmann::json& j, const SMixConfig& c) {
  j = {{"alpha", c.alpha},
       {"beta", c.beta},
       {"gamma", c.gamma ? nlohmann::json(*c.gamma) : nlohmann::json(nullptr)},
       {"zeta", c.zeta},
       {"strategy", to_string(c.strategy)}};
}

void from_json(const nlohmann::json& j, SMixConfig& c) {
  SMixConfig d;
  c.alpha = j.value("alpha", d.alpha);
  c.beta = j.value("beta", d.beta);
  c.gamma = j.contains("gamma") && !j.at("gamma").is_null() ? std::optional<double>(j.at("gamma").get<double>())
                                                             : std::nullopt;
  c.zeta = j.value("zeta", d.zeta);
  c.strategy = mix_strategy_from_string(j.value("strategy", to_string(d.strategy)));
}

MixPartnerSource::MixPartnerSource(const DatasetBundle& bundle, const BiasSplit& split)
    : bundle_(&bundle), bias_(split.bias_indices), unbias_(split.unbias_indices) {
  all_.resize(bundle.train.size());
  for (std::size_t i = 0; i < all_.size(); ++i) all_[i] = i;
}

ag::Matrix MixPartnerSource::gather_x(const std::vector<std::size_t>& idx) const {
  return gather_features(bundle_->train, idx);
}

ag::Matrix MixPartnerSource::gather_y(const std::vector<std::size_t>& idx) const {
  return one_hot(gather_labels(bundle_->train, idx), bundle_->num_classes);
}

std::vector<std::size_t> MixPartnerSource::resample(const std::vector<std::size_t>& pool, std::size_t n,
                                                    Rng& rng) const {
  if (pool.empty()) throw PreconditionError("mix partners: cannot resample from an empty subset");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pool[pick(rng)];
  return out;
}

MixPartnerSource::Inputs MixPartnerSource::select(const PairBatch& batch, MixStrategy strategy, Rng& rng) const {
  const std::size_t n = batch.idx1.size();
  switch (strategy) {
    case MixStrategy::kBiasUnbias:
    case MixStrategy::kNone:
      return {batch.x1, batch.y1, batch.x2, batch.y2};
    case MixStrategy::kBiasBias: {
      const auto idx = resample(bias_, n, rng);
      return {batch.x1, batch.y1, gather_x(idx), gather_y(idx)};
    }
    case MixStrategy::kUnbiasUnbias: {
      const auto idx = resample(unbias_, n, rng);
      return {gather_x(idx), gather_y(idx), batch.x2, batch.y2};
    }
    case MixStrategy::kVanilla: {
      const auto a = resample(all_, n, rng);
      const auto b = resample(all_, n, rng);
      return {gather_x(a), gather_y(a), gather_x(b), gather_y(b)};
    }
  }
  throw PreconditionError("mix partners: unknown strategy");
}

SMixLosses s_mix_loss(const PairBatch& batch, const ModelTriplet& model, const SMixConfig& cfg, double gamma,
                      const MixPartnerSource& partners, Rng& rng) {
  SMixLosses out;
  out.erm = weighted_erm_loss(batch, model, gamma);
  if (cfg.strategy == MixStrategy::kNone) {
    out.mix = ag::Var::scalar(0.0);
    out.lambda = Eigen::VectorXd::Ones(batch.size());
    out.total = out.erm;
    return out;
  }
  const auto in = partners.select(batch, cfg.strategy, rng);
  Eigen::VectorXd lambda(batch.size());
  for (ag::Index i = 0; i < lambda.size(); ++i) lambda(i) = sample_beta_reparam(cfg.alpha, cfg.beta, rng).lambda;
  const MixBatch m = mix_pair(in.xa, in.ya, in.xb, in.yb, lambda);
  out.mix = ag::softmax_cross_entropy(model.logits(ag::Var(m.x_mix)), m.y_mix);
  out.lambda = lambda;
  out.total = out.erm + cfg.zeta * out.mix;
  return out;
}

SMixLosses s_mix_step(const PairBatch& batch, ModelTriplet& model, Adam& optimizer, const SMixConfig& cfg,
                      double gamma, const MixPartnerSource& partners, Rng& rng) {
  optimizer.zero_grad();
  SMixLosses l = s_mix_loss(batch, model, cfg, gamma, partners, rng);
  if (!std::isfinite(l.total.item())) throw NumericalError("s-mix: non-finite loss");
  l.total.backward();
  optimizer.step();
  return l;
}

ag::Var beta_mean_regularizer(const BetaParams& params, double target_ratio) {
  const ag::Var mean = ag::div(params.alpha, params.alpha + params.beta);
  return ag::mean(ag::square(ag::add_scalar(mean, -target_ratio)));
}

void LMixConfig::validate() const {
  if (!(omega >= 0)) throw ConfigError("l-mix: omega must be non-negative");
  if (fixed_beta && !(fixed_beta->first > 0 && fixed_beta->second > 0)) {
    throw ConfigError("l-mix: fixed Beta parameters must be positive");
  }
}

void to_json(nlohmann::json& j, const LMixConfig& c) {
  j = {{"omega", c.omega}, {"literal_grl", c.literal_grl}, {"grl_enabled", c.grl_enabled}};
  j["fixed_beta"] = c.fixed_beta ? nlohmann::json::array({c.fixed_beta->first, c.fixed_beta->second})
                                 : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, LMixConfig& c) {
  LMixConfig d;
  c.omega = j.value("omega", d.omega);
  c.literal_grl = j.value("literal_grl", d.literal_grl);
  c.grl_enabled = j.value("grl_enabled", d.grl_enabled);
  c.fixed_beta.reset();
  if (j.contains("fixed_beta") && !j.at("fixed_beta").is_null()) {
    const auto& fb = j.at("fixed_beta");
    c.fixed_beta = std::make_pair(fb.at(0).get<double>(), fb.at(1).get<double>());
  }
}

LMixLosses l_mix_loss(const PairBatch& batch, const ModelTriplet& model, const LMixConfig& cfg, double target_ratio,
                      Rng& rng) {
  LMixLosses out;
  if (cfg.fixed_beta) {
    out.params = {ag::Var(ag::Matrix::Constant(batch.size(), 1, cfg.fixed_beta->first)),
                  ag::Var(ag::Matrix::Constant(batch.size(), 1, cfg.fixed_beta->second))};
  } else {
    const ag::Var f1 = model.features().forward(ag::Var(batch.x1));
    const ag::Var f2 = model.features().forward(ag::Var(batch.x2));
    out.params = model.beta_net().forward(f1, f2);  // detaches f1, f2
  }
  auto reverse = [&](const ag::Var& v) { return cfg.grl_enabled ? ag::grl(v) : v; };
  const BetaParams sampler_in{reverse(out.params.alpha), reverse(out.params.beta)};
  const BetaParams reg_in = cfg.literal_grl ? sampler_in : out.params;

  out.lambda = sample_lambda_reparam(sampler_in, rng);
  const ag::Var x_mix = mix_rows(ag::Var(batch.x1), ag::Var(batch.x2), out.lambda);
  const ag::Var y_mix = mix_rows(ag::Var(batch.y1), ag::Var(batch.y2), out.lambda);
  out.ce = ag::softmax_cross_entropy(model.logits(x_mix), y_mix);
  out.reg = beta_mean_regularizer(reg_in, target_ratio);
  out.total = out.ce + cfg.omega * out.reg;
  return out;
}

LMixLosses l_mix_training_step(const PairBatch& batch, ModelTriplet& model, Adam& optimizer, const LMixConfig& cfg,
                               double target_ratio, Rng& rng) {
  optimizer.zero_grad();
  LMixLosses l = l_mix_loss(batch, model, cfg, target_ratio, rng);
  if (!std::isfinite(l.total.item())) {
    throw NumericalError("l-mix: non-finite loss (ce=" + std::to_string(l.ce.item()) +
                         ", reg=" + std::to_string(l.reg.item()) +
                         ", mean alpha=" + std::to_string(l.params.alpha.value().mean()) +
                         ", mean beta=" + std::to_string(l.params.beta.value().mean()) + ")");
  }
  l.total.backward();
  optimizer.step();
  return l;
}

}  // namespace debiasmix
