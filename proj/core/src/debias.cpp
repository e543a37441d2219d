#include "debiasmix/debias.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "debiasmix/errors.hpp"
#include "debiasmix/io.hpp"
#include "debiasmix/optim.hpp"
#include "debiasmix/pair_sampler.hpp"
#include "debiasmix/training.hpp"

namespace debiasmix {

std::string to_string(DebiasMethod m) {
  switch (m) {
    case DebiasMethod::kErm:
      return "erm";
    case DebiasMethod::kSMix:
      return "s-mix";
    case DebiasMethod::kLMix:
      return "l-mix";
  }
  return "?";
}

DebiasMethod debias_method_from_string(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "erm") return DebiasMethod::kErm;
  if (l == "s-mix" || l == "smix") return DebiasMethod::kSMix;
  if (l == "l-mix" || l == "lmix") return DebiasMethod::kLMix;
  throw ConfigError("unknown training method '" + s + "' (expected erm, s-mix or l-mix)");
}

void DebiasConfig::validate() const {
  if (epochs < 1) throw ConfigError("training: epochs must be >= 1");
  if (!(lr > 0)) throw ConfigError("training: learning rate must be positive");
  if (batch_size == 0) throw ConfigError("training: batch size must be positive");
  smix.validate();
  lmix.validate();
}

void to_json(nlohmann::json& j, const DebiasConfig& c) {
  j = {{"method", to_string(c.method)}, {"epochs", c.epochs}, {"lr", c.lr}, {"batch_size", c.batch_size},
       {"smix", c.smix},                {"lmix", c.lmix},     {"arch", c.arch}};
}

void from_json(const nlohmann::json& j, DebiasConfig& c) {
  DebiasConfig d;
  c.method = debias_method_from_string(j.value("method", to_string(d.method)));
  c.epochs = j.value("epochs", d.epochs);
  c.lr = j.value("lr", d.lr);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.smix = j.contains("smix") ? j.at("smix").get<SMixConfig>() : d.smix;
  c.lmix = j.contains("lmix") ? j.at("lmix").get<LMixConfig>() : d.lmix;
  c.arch = j.contains("arch") ? j.at("arch").get<ArchitectureConfig>() : d.arch;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

nlohmann::json epoch_json(const EpochMetrics& e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"train_acc", e.train_acc},
          {"acc_all", e.acc_all},
          {"acc_unbiased", opt_json(e.acc_unbiased)},
          {"loss_aligned", opt_json(e.loss_aligned)},
          {"loss_conflicting", opt_json(e.loss_conflicting)},
          {"beta_mean", opt_json(e.beta_mean)}};
}

EpochMetrics epoch_from_json(const nlohmann::json& j) {
  EpochMetrics e;
  e.epoch = j.at("epoch").get<int>();
  e.train_loss = j.at("train_loss").get<double>();
  e.train_acc = j.at("train_acc").get<double>();
  e.acc_all = j.at("acc_all").get<double>();
  e.acc_unbiased = opt_from(j, "acc_unbiased");
  e.loss_aligned = opt_from(j, "loss_aligned");
  e.loss_conflicting = opt_from(j, "loss_conflicting");
  e.beta_mean = opt_from(j, "beta_mean");
  return e;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

nlohmann::json RunManifest::deterministic_view() const {
  nlohmann::json j = to_json(*this);
  j.erase("wall_time");
  j.erase("started_at");
  j.erase("finished_at");
  return j;
}

nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : m.epochs) epochs.push_back(epoch_json(e));
  return {{"schema_version", io::kSchemaVersion},
          {"run_id", m.run_id},
          {"method", m.method},
          {"axis", m.axis},
          {"value", m.value},
          {"config", m.config},
          {"seed", m.seed},
          {"split", m.split},
          {"epochs", epochs},
          {"final", to_json(m.final_metrics)},
          {"warnings", m.warnings},
          {"artifacts", m.artifacts},
          {"wall_time", m.wall_time},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at}};
}

RunManifest run_manifest_from_json(const nlohmann::json& j) {
  io::check_schema(j, "run manifest");
  try {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.method = j.at("method").get<std::string>();
    m.axis = j.at("axis").get<std::string>();
    m.value = j.at("value").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.split = j.at("split");
    for (const auto& e : j.at("epochs")) m.epochs.push_back(epoch_from_json(e));
    m.final_metrics = group_accuracies_from_json(j.at("final"));
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    m.artifacts = j.at("artifacts");
    m.wall_time = j.at("wall_time").get<double>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("run manifest: ") + e.what());
  }
}

void save_manifest(const RunManifest& m, const std::filesystem::path& path) { io::write_json(path, to_json(m)); }

RunManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("no run manifest at " + path.string());
  return run_manifest_from_json(io::read_json(path));
}

namespace {

// Full pass over the training partition: accuracy and per-group mean CE.
void fill_train_metrics(const ModelTriplet& model, const DatasetBundle& bundle, const ag::Matrix& x,
                        const ag::Matrix& y, EpochMetrics& e) {
  const ag::Matrix logp = ag::log_softmax(model.logits(x));
  const Eigen::VectorXd ce = -(y.cwiseProduct(logp)).rowwise().sum();
  std::size_t hits = 0;
  for (ag::Index i = 0; i < logp.rows(); ++i) {
    ag::Index best = 0;
    logp.row(i).maxCoeff(&best);
    hits += static_cast<int>(best) == bundle.train[static_cast<std::size_t>(i)].class_label;
  }
  e.train_acc = static_cast<double>(hits) / static_cast<double>(bundle.train.size());
  if (!bundle.has_ground_truth()) return;
  const auto aligned = train_aligned_flags(bundle);
  double sa = 0, sc = 0;
  std::size_t na = 0, nc = 0;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    (aligned[i] ? sa : sc) += ce(static_cast<ag::Index>(i));
    (aligned[i] ? na : nc) += 1;
  }
  if (na) e.loss_aligned = sa / static_cast<double>(na);
  if (nc) e.loss_conflicting = sc / static_cast<double>(nc);
}

nlohmann::json split_record(const DatasetBundle& bundle, const BiasSplit& split) {
  nlohmann::json j{{"method", to_string(split.method)},
                   {"params", split.params},
                   {"K", split.epochs},
                   {"n_bias", split.bias_indices.size()},
                   {"n_unbias", split.unbias_indices.size()}};
  if (bundle.has_ground_truth()) {
    const auto q = split_quality(split, train_aligned_flags(bundle));
    j["precision"] = q.precision;
    j["recall"] = q.recall;
    j["f1"] = q.f1;
  } else {
    j["precision"] = j["recall"] = j["f1"] = nullptr;
  }
  return j;
}

}  // namespace

DebiasResult train_debiased(const DatasetBundle& bundle, const BiasSplit& split, const DebiasConfig& cfg,
                            std::uint64_t seed) {
  cfg.validate();
  split.validate(bundle.train.size());
  const auto t0 = std::chrono::steady_clock::now();

  RunManifest manifest;
  manifest.started_at = utc_now();
  manifest.seed = seed;
  manifest.split = split_record(bundle, split);

  DebiasMethod method = cfg.method;
  if (method != DebiasMethod::kErm && split.unbias_indices.empty()) {
    manifest.warnings.push_back("unbias split is empty; falling back to vanilla ERM training");
    method = DebiasMethod::kErm;
  }
  if (method != DebiasMethod::kErm && split.bias_indices.empty()) {
    manifest.warnings.push_back("bias split is empty; falling back to vanilla ERM training");
    method = DebiasMethod::kErm;
  }
  manifest.method = to_string(method);

  const ArchitectureConfig arch = resolve_architecture(cfg.arch, bundle);
  DebiasConfig resolved = cfg;
  resolved.arch = arch;
  const double gamma = cfg.smix.gamma.value_or(std::clamp(1.0 - split.unbias_fraction(), 1e-6, 1.0 - 1e-6));
  resolved.smix.gamma = gamma;
  const double target_ratio = split.unbias_fraction();
  manifest.config = resolved;
  manifest.config["target_ratio"] = target_ratio;

  ModelTriplet model(arch, seed);
  const ag::Matrix train_x = all_features(bundle.train);
  const ag::Matrix train_y = one_hot(all_labels(bundle.train), bundle.num_classes);

  auto finish_epoch = [&](int epoch, double loss, std::optional<double> beta_mean) {
    EpochMetrics e;
    e.epoch = epoch;
    e.train_loss = loss;
    e.beta_mean = beta_mean;
    fill_train_metrics(model, bundle, train_x, train_y, e);
    const auto g = evaluate(model, bundle);
    e.acc_all = g.acc_all;
    e.acc_unbiased = g.acc_unbiased;
    manifest.epochs.push_back(e);
  };

  if (method == DebiasMethod::kErm) {
    ErmTrainer trainer(model, bundle, TrainOptions{cfg.epochs, cfg.lr, cfg.batch_size, seed});
    for (int ep = 1; ep <= cfg.epochs; ++ep) finish_epoch(ep, trainer.run_epoch(), std::nullopt);
  } else {
    PairSampler sampler(split, bundle, cfg.batch_size, seed);
    Rng mix_rng = make_rng(seed, streams::kMix);
    const bool lmix = method == DebiasMethod::kLMix;
    Adam optimizer(vars_of(lmix ? model.all_parameters() : model.classification_parameters()),
                   AdamOptions{.lr = cfg.lr});
    const MixPartnerSource partners(bundle, split);
    for (int ep = 1; ep <= cfg.epochs; ++ep) {
      double total = 0.0, beta_mean = 0.0;
      const std::size_t steps = sampler.batches_per_epoch();
      for (std::size_t s = 0; s < steps; ++s) {
        const PairBatch batch = sampler.next();
        if (lmix) {
          const auto l = l_mix_training_step(batch, model, optimizer, cfg.lmix, target_ratio, mix_rng);
          total += l.total.item();
          const ag::Matrix& a = l.params.alpha.value();
          const ag::Matrix& b = l.params.beta.value();
          beta_mean += (a.array() / (a.array() + b.array())).mean();
        } else {
          total += s_mix_step(batch, model, optimizer, cfg.smix, gamma, partners, mix_rng).total.item();
        }
      }
      const double n = static_cast<double>(steps);
      finish_epoch(ep, total / n, lmix ? std::optional<double>(beta_mean / n) : std::nullopt);
    }
  }

  manifest.final_metrics = evaluate(model, bundle);
  manifest.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.finished_at = utc_now();
  return {std::move(model), std::move(manifest)};
}

}  // namespace debiasmix
