#include "debiasmix/pipeline.hpp"

#include <sstream>

#include "debiasmix/errors.hpp"
#include "debiasmix/identification.hpp"
#include "debiasmix/io.hpp"

namespace debiasmix {

DatasetBundle resolve_bundle(const ExperimentConfig& config) {
  if (config.dataset.bundle_path) return load_bundle(*config.dataset.bundle_path);
  return generate_synthetic_biased(config.dataset.generator, config.seed);
}

namespace {

TrainOptions id_train_options(const IdentificationSection& s, std::uint64_t seed) {
  return TrainOptions{s.epochs, s.lr, s.batch_size, seed + s.seed_offset};
}

PredictionHistoryResult run_ph(const DatasetBundle& bundle, const IdentificationSection& s, std::uint64_t seed,
                               const ArchitectureConfig& arch) {
  PredictionHistoryOptions o;
  o.M = s.M;
  o.epochs = s.epochs;
  o.cap_weights = s.cap_weights;
  o.train = id_train_options(s, seed);
  o.arch = arch;
  return split_by_prediction_history(bundle, o);
}

}  // namespace

IdentificationOutput identify(const DatasetBundle& bundle, const IdentificationSection& section, std::uint64_t seed) {
  const ArchitectureConfig arch{};
  IdentificationOutput out;
  switch (section.method) {
    case SplitMethod::kOracle:
      if (!bundle.has_ground_truth()) throw PreconditionError("oracle split needs ground-truth bias domains");
      out.split = make_oracle_split(train_aligned_flags(bundle));
      break;
    case SplitMethod::kSinglePrediction: {
      SinglePredictionOptions o;
      o.gamma = section.gamma;
      o.max_epochs = section.max_epochs;
      o.train = id_train_options(section, seed);
      o.arch = arch;
      const auto r = split_by_single_prediction(bundle, o);
      out.split = r.split;
      out.info = {{"achieved_accuracy", r.achieved_accuracy}, {"epochs", r.epochs}};
      break;
    }
    case SplitMethod::kPredictionHistory: {
      auto r = run_ph(bundle, section, seed, arch);
      out.split = std::move(r.split);
      out.history = std::move(r.history);
      break;
    }
    case SplitMethod::kRandom: {
      double fraction = 0.0;
      if (section.random_bias_fraction) {
        fraction = *section.random_bias_fraction;
      } else {
        const auto ph = run_ph(bundle, section, seed, arch);
        fraction = static_cast<double>(ph.split.bias_indices.size()) / static_cast<double>(ph.split.size());
        out.info = {{"matched_ph_unbias", ph.split.unbias_indices.size()}};
      }
      out.split = make_random_split(bundle.train.size(), fraction, seed);
      break;
    }
  }
  return out;
}

RunManifest run_experiment(const DatasetBundle& bundle, const ExperimentConfig& config) {
  config.validate();
  const auto id = identify(bundle, config.identification, config.seed);
  auto result = train_debiased(bundle, id.split, config.training, config.seed);
  RunManifest m = std::move(result.manifest);
  m.config = to_json(config);
  m.split["info"] = id.info;
  return m;
}

ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis, const nlohmann::json& value) {
  ExperimentConfig c = base;
  try {
    if (axis == "gamma") {
      c.identification.method = SplitMethod::kSinglePrediction;
      c.identification.gamma = value.get<double>();
    } else if (axis == "M") {
      c.identification.method = SplitMethod::kPredictionHistory;
      c.identification.M = value.get<int>();
    } else if (axis == "zeta") {
      c.training.method = DebiasMethod::kSMix;
      c.training.smix.zeta = value.get<double>();
    } else if (axis == "omega") {
      c.training.method = DebiasMethod::kLMix;
      c.training.lmix.omega = value.get<double>();
    } else if (axis == "strategy") {
      c.training.method = DebiasMethod::kSMix;
      c.training.smix.strategy = mix_strategy_from_string(value.get<std::string>());
    } else if (axis == "split_method") {
      c.identification.method = split_method_from_string(value.get<std::string>());
    } else {
      throw ConfigError("unknown ablation axis '" + axis + "' (expected gamma, M, zeta, omega, strategy, split_method)");
    }
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("ablation axis '" + axis + "': value " + value.dump() + " has the wrong type");
  }
  c.validate();
  return c;
}

namespace {

std::string value_label(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

bool training_only_axis(const std::string& axis) { return axis == "zeta" || axis == "omega" || axis == "strategy"; }

}  // namespace

AblationGrid run_ablation(const DatasetBundle& bundle, const std::string& axis, const std::vector<nlohmann::json>& values,
                          const ExperimentConfig& base) {
  if (values.empty()) throw ConfigError("ablation: the value list is empty");
  AblationGrid grid;
  grid.axis = axis;
  grid.seed = base.seed;
  std::optional<IdentificationOutput> shared;
  for (std::size_t k = 0; k < values.size(); ++k) {
    AblationRun run;
    run.value = value_label(values[k]);
    try {
      const ExperimentConfig cfg = apply_axis(base, axis, values[k]);
      std::optional<IdentificationOutput> own;
      const IdentificationOutput* id = nullptr;
      if (training_only_axis(axis)) {
        if (!shared) shared = identify(bundle, cfg.identification, cfg.seed);
        id = &*shared;
      } else {
        own = identify(bundle, cfg.identification, cfg.seed);
        id = &*own;
      }
      auto result = train_debiased(bundle, id->split, cfg.training, cfg.seed);
      RunManifest m = std::move(result.manifest);
      m.config = to_json(cfg);
      m.split["info"] = id->info;
      m.axis = axis;
      m.value = run.value;
      std::ostringstream rid;
      rid << axis << "-" << k << "-s" << cfg.seed;
      m.run_id = rid.str();
      run.manifest = std::move(m);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    grid.runs.push_back(std::move(run));
  }
  return grid;
}

void save_grid(const AblationGrid& grid, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t k = 0; k < grid.runs.size(); ++k) {
    const auto& r = grid.runs[k];
    nlohmann::json entry{{"value", r.value}, {"error", r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr)}};
    if (r.manifest) {
      const std::string file = "run_" + std::to_string(k) + ".json";
      save_manifest(*r.manifest, dir / file);
      entry["manifest"] = file;
    } else {
      entry["manifest"] = nullptr;
    }
    runs.push_back(entry);
  }
  io::write_json(dir / "grid.json",
                 {{"schema_version", io::kSchemaVersion}, {"axis", grid.axis}, {"seed", grid.seed}, {"runs", runs}});
}

AblationGrid load_grid(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "grid.json")) throw MissingArtifactError("no ablation grid at " + dir.string());
  const auto j = io::read_json(dir / "grid.json");
  io::check_schema(j, "grid");
  AblationGrid g;
  try {
    g.axis = j.at("axis").get<std::string>();
    g.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("runs")) {
      AblationRun r;
      r.value = e.at("value").get<std::string>();
      if (!e.at("error").is_null()) r.error = e.at("error").get<std::string>();
      if (!e.at("manifest").is_null()) r.manifest = load_manifest(dir / e.at("manifest").get<std::string>());
      g.runs.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("grid: ") + e.what());
  }
  return g;
}

}  // namespace debiasmix
