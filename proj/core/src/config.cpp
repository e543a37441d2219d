#include "debiasmix/config.hpp"

#include <set>

#include "debiasmix/errors.hpp"
#include "debiasmix/io.hpp"

namespace debiasmix {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v, where);
  out = v;
}

template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

GeneratorConfig generator_from(const nlohmann::json& j) {
  check_keys(j,
             {"num_classes", "n_per_class", "rho", "corruption_strength", "image_size", "channels", "test_per_cell",
              "class_signal", "noise_std", "texture_std", "severity_jitter", "appearance_seed"},
             "dataset.generator");
  GeneratorConfig g;
  const std::string w = "dataset.generator";
  read(j, "num_classes", g.num_classes, w);
  read(j, "n_per_class", g.n_per_class, w);
  read(j, "rho", g.rho, w);
  read(j, "corruption_strength", g.corruption_strength, w);
  read(j, "image_size", g.image_size, w);
  read(j, "channels", g.channels, w);
  read(j, "test_per_cell", g.test_per_cell, w);
  read(j, "class_signal", g.class_signal, w);
  read(j, "noise_std", g.noise_std, w);
  read(j, "texture_std", g.texture_std, w);
  read(j, "severity_jitter", g.severity_jitter, w);
  read(j, "appearance_seed", g.appearance_seed, w);
  return g;
}

ArchitectureConfig arch_from(const nlohmann::json& j) {
  check_keys(j,
             {"input_dim", "backbone_hidden", "feature_dim", "classifier_hidden", "num_classes", "beta_hidden",
              "beta_floor"},
             "training.arch");
  ArchitectureConfig a;
  const std::string w = "training.arch";
  read(j, "input_dim", a.input_dim, w);
  read(j, "backbone_hidden", a.backbone_hidden, w);
  read(j, "feature_dim", a.feature_dim, w);
  read(j, "classifier_hidden", a.classifier_hidden, w);
  read(j, "num_classes", a.num_classes, w);
  read(j, "beta_hidden", a.beta_hidden, w);
  read(j, "beta_floor", a.beta_floor, w);
  return a;
}

DebiasConfig training_from(const nlohmann::json& j) {
  check_keys(j, {"method", "epochs", "lr", "batch_size", "smix", "lmix", "arch"}, "training");
  DebiasConfig c;
  const std::string w = "training";
  std::string method = to_string(c.method);
  read(j, "method", method, w);
  c.method = debias_method_from_string(method);
  read(j, "epochs", c.epochs, w);
  read(j, "lr", c.lr, w);
  read(j, "batch_size", c.batch_size, w);
  if (j.contains("smix")) {
    const auto& s = j.at("smix");
    check_keys(s, {"alpha", "beta", "gamma", "zeta", "strategy"}, "training.smix");
    read(s, "alpha", c.smix.alpha, "training.smix");
    read(s, "beta", c.smix.beta, "training.smix");
    read_optional(s, "gamma", c.smix.gamma, "training.smix");
    read(s, "zeta", c.smix.zeta, "training.smix");
    std::string strategy = to_string(c.smix.strategy);
    read(s, "strategy", strategy, "training.smix");
    c.smix.strategy = mix_strategy_from_string(strategy);
  }
  if (j.contains("lmix")) {
    const auto& l = j.at("lmix");
    check_keys(l, {"omega", "literal_grl", "grl_enabled", "fixed_beta"}, "training.lmix");
    read(l, "omega", c.lmix.omega, "training.lmix");
    read(l, "literal_grl", c.lmix.literal_grl, "training.lmix");
    read(l, "grl_enabled", c.lmix.grl_enabled, "training.lmix");
    read_optional(l, "fixed_beta", c.lmix.fixed_beta, "training.lmix");
  }
  if (j.contains("arch")) c.arch = arch_from(j.at("arch"));
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!dataset.bundle_path) dataset.generator.validate();
  const auto& id = identification;
  if (!(id.gamma > 0.0 && id.gamma < 1.0)) throw ConfigError("identification.gamma must lie in (0, 1)");
  if (id.max_epochs < 1) throw ConfigError("identification.max_epochs must be >= 1");
  if (id.M < 1) throw ConfigError("identification.M must be >= 1");
  if (id.epochs < 1) throw ConfigError("identification.epochs must be >= 1");
  if (!(id.lr > 0)) throw ConfigError("identification.lr must be positive");
  if (id.batch_size == 0) throw ConfigError("identification.batch_size must be positive");
  if (id.random_bias_fraction && !(*id.random_bias_fraction > 0 && *id.random_bias_fraction < 1)) {
    throw ConfigError("identification.random_bias_fraction must lie in (0, 1)");
  }
  training.validate();
  for (const auto& f : evaluation.report_formats) {
    if (f != "csv" && f != "json" && f != "svg") throw ConfigError("evaluation.report_formats: unknown format '" + f + "'");
  }
}

nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& id = c.identification;
  return {{"schema_version", io::kSchemaVersion},
          {"seed", c.seed},
          {"dataset", {{"bundle_path", opt(c.dataset.bundle_path)}, {"generator", c.dataset.generator}}},
          {"identification",
           {{"method", to_string(id.method)},
            {"gamma", id.gamma},
            {"max_epochs", id.max_epochs},
            {"M", id.M},
            {"epochs", id.epochs},
            {"cap_weights", id.cap_weights},
            {"lr", id.lr},
            {"batch_size", id.batch_size},
            {"random_bias_fraction", opt(id.random_bias_fraction)},
            {"seed_offset", id.seed_offset}}},
          {"training", c.training},
          {"evaluation", {{"report_formats", c.evaluation.report_formats}}}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"schema_version", "seed", "dataset", "identification", "training", "evaluation"}, "config");
  if (j.contains("schema_version") && j.at("schema_version") != io::kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version");
  }
  ExperimentConfig c;
  read(j, "seed", c.seed, "config");
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, {"bundle_path", "generator"}, "dataset");
    read_optional(d, "bundle_path", c.dataset.bundle_path, "dataset");
    if (d.contains("generator")) c.dataset.generator = generator_from(d.at("generator"));
  }
  if (j.contains("identification")) {
    const auto& s = j.at("identification");
    const std::string w = "identification";
    check_keys(s,
               {"method", "gamma", "max_epochs", "M", "epochs", "cap_weights", "lr", "batch_size",
                "random_bias_fraction", "seed_offset"},
               w);
    auto& id = c.identification;
    std::string method = to_string(id.method);
    read(s, "method", method, w);
    id.method = split_method_from_string(method);
    read(s, "gamma", id.gamma, w);
    read(s, "max_epochs", id.max_epochs, w);
    read(s, "M", id.M, w);
    read(s, "epochs", id.epochs, w);
    read(s, "cap_weights", id.cap_weights, w);
    read(s, "lr", id.lr, w);
    read(s, "batch_size", id.batch_size, w);
    read_optional(s, "random_bias_fraction", id.random_bias_fraction, w);
    read(s, "seed_offset", id.seed_offset, w);
  }
  if (j.contains("training")) c.training = training_from(j.at("training"));
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    check_keys(e, {"report_formats"}, "evaluation");
    read(e, "report_formats", c.evaluation.report_formats, "evaluation");
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = io::read_json(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace debiasmix
