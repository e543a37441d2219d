#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "debiasmix/config.hpp"
#include "debiasmix/dataset.hpp"
#include "debiasmix/debias.hpp"
#include "debiasmix/errors.hpp"
#include "debiasmix/evaluation.hpp"
#include "debiasmix/history.hpp"
#include "debiasmix/io.hpp"
#include "debiasmix/models.hpp"
#include "debiasmix/pipeline.hpp"
#include "debiasmix/report.hpp"
#include "debiasmix/split.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace debiasmix::cli {
namespace {

struct Shared {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  bool force = false;
};

// Config fragment each stage depends on. A stage is up to date when its
// stamp equals the fragment computed from the current config.
json fragment(const json& resolved, const std::string& stage) {
  json f{{"seed", resolved.at("seed")}, {"dataset", resolved.at("dataset")}};
  if (stage == "generate") return f;
  f["identification"] = resolved.at("identification");
  if (stage == "identify") return f;
  f["training"] = resolved.at("training");
  return f;
}

fs::path stamp_path(const fs::path& out, const std::string& stage) { return out / "stamps" / (stage + ".json"); }

std::optional<json> read_stamp(const fs::path& out, const std::string& stage) {
  const auto p = stamp_path(out, stage);
  if (!fs::exists(p)) return std::nullopt;
  return io::read_json(p);
}

void write_stamp(const fs::path& out, const std::string& stage, const json& f) {
  fs::create_directories(out / "stamps");
  io::write_json(stamp_path(out, stage), f);
}

// The upstream stage must have run with the same config fragment.
void require_upstream(const fs::path& out, const std::string& upstream, const json& expected,
                      const fs::path& artifact) {
  const auto stamp = read_stamp(out, upstream);
  if (!stamp || !fs::exists(artifact)) {
    throw MissingArtifactError("missing " + artifact.string() + ": run " + upstream + " first");
  }
  if (*stamp != expected) {
    throw MissingArtifactError(artifact.string() + " was produced with a different configuration: rerun " + upstream +
                               " with --force");
  }
}

enum class Action { kRun, kSkip };

// Idempotency: identical stamp means nothing to do; a different one needs --force.
Action check_own(const fs::path& out, const std::string& stage, const json& expected, const fs::path& artifact,
                 bool force) {
  const auto stamp = read_stamp(out, stage);
  if (!stamp || !fs::exists(artifact) || force) return Action::kRun;
  if (*stamp == expected) {
    std::cout << stage << ": up to date (" << artifact.string() << ")\n";
    return Action::kSkip;
  }
  throw ConfigError(artifact.string() + " exists with a different configuration; pass --force to overwrite");
}

ExperimentConfig resolve_config(const Shared& s) {
  ExperimentConfig cfg;
  const fs::path persisted = fs::path(s.out) / layout::kConfig;
  if (!s.config_path.empty()) {
    if (!fs::exists(s.config_path)) throw ConfigError("config file not found: " + s.config_path);
    cfg = load_experiment_config(s.config_path);
  } else if (fs::exists(persisted)) {
    cfg = load_experiment_config(persisted);
  }
  if (s.seed) cfg.seed = *s.seed;
  cfg.validate();
  return cfg;
}

void persist_config(const fs::path& out, const ExperimentConfig& cfg) {
  fs::create_directories(out);
  io::write_json(out / layout::kConfig, to_json(cfg));
}

int cmd_generate(const Shared& s) {
  const fs::path out = s.out;
  const auto cfg = resolve_config(s);
  const json resolved = to_json(cfg);
  const auto f = fragment(resolved, "generate");
  const auto dir = out / layout::kBundleDir;
  if (check_own(out, "generate", f, dir / "manifest.json", s.force) == Action::kSkip) return kExitOk;

  const auto bundle = resolve_bundle(cfg);
  fs::remove_all(dir);
  save_bundle(bundle, dir);
  persist_config(out, cfg);
  write_stamp(out, "generate", f);
  for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "generate: " << bundle.train.size() << " train / " << bundle.test.size() << " test samples -> "
            << dir.string() << "\n";
  return kExitOk;
}

int cmd_identify(const Shared& s) {
  const fs::path out = s.out;
  const auto cfg = resolve_config(s);
  const json resolved = to_json(cfg);
  require_upstream(out, "generate", fragment(resolved, "generate"), out / layout::kBundleDir / "manifest.json");
  const auto f = fragment(resolved, "identify");
  if (check_own(out, "identify", f, out / layout::kSplit, s.force) == Action::kSkip) return kExitOk;

  const auto bundle = load_bundle(out / layout::kBundleDir);
  const auto id = identify(bundle, cfg.identification, cfg.seed);
  save_split(id.split, out / layout::kSplit);
  fs::remove_all(out / layout::kHistoryDir);
  if (id.history) save_history(*id.history, out / layout::kHistoryDir);
  io::write_json(out / layout::kIdentifyInfo, id.info);
  persist_config(out, cfg);
  write_stamp(out, "identify", f);
  std::cout << "identify (" << to_string(id.split.method) << "): |bias| = " << id.split.bias_indices.size()
            << ", |unbias| = " << id.split.unbias_indices.size() << " -> " << (out / layout::kSplit).string() << "\n";
  return kExitOk;
}

int cmd_train(const Shared& s) {
  const fs::path out = s.out;
  const auto cfg = resolve_config(s);
  const json resolved = to_json(cfg);
  require_upstream(out, "generate", fragment(resolved, "generate"), out / layout::kBundleDir / "manifest.json");
  require_upstream(out, "identify", fragment(resolved, "identify"), out / layout::kSplit);
  const auto f = fragment(resolved, "train");
  if (check_own(out, "train", f, out / layout::kManifest, s.force) == Action::kSkip) return kExitOk;

  const auto bundle = load_bundle(out / layout::kBundleDir);
  const auto split = load_split(out / layout::kSplit);
  auto result = train_debiased(bundle, split, cfg.training, cfg.seed);
  auto& m = result.manifest;
  m.run_id = "train-s" + std::to_string(cfg.seed);
  m.config = resolved;
  if (fs::exists(out / layout::kIdentifyInfo)) m.split["info"] = io::read_json(out / layout::kIdentifyInfo);
  m.artifacts = {{"bundle", layout::kBundleDir},
                 {"split", layout::kSplit},
                 {"checkpoint", layout::kCheckpointDir},
                 {"manifest", layout::kManifest}};
  fs::remove_all(out / layout::kCheckpointDir);
  save_checkpoint(result.model, out / layout::kCheckpointDir);
  save_manifest(m, out / layout::kManifest);
  persist_config(out, cfg);
  write_stamp(out, "train", f);
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "train (" << m.method << "): acc_all = " << m.final_metrics.acc_all;
  if (m.final_metrics.acc_unbiased) std::cout << ", acc_unbiased = " << *m.final_metrics.acc_unbiased;
  std::cout << " -> " << (out / layout::kManifest).string() << "\n";
  return kExitOk;
}

int cmd_eval(const Shared& s) {
  const fs::path out = s.out;
  const auto cfg = resolve_config(s);
  const json resolved = to_json(cfg);
  require_upstream(out, "generate", fragment(resolved, "generate"), out / layout::kBundleDir / "manifest.json");
  require_upstream(out, "train", fragment(resolved, "train"), out / layout::kCheckpointDir / "checkpoint.json");
  const auto f = fragment(resolved, "train");
  if (check_own(out, "eval", f, out / layout::kMetrics, s.force) == Action::kSkip) return kExitOk;

  const auto bundle = load_bundle(out / layout::kBundleDir);
  const auto model = load_checkpoint(out / layout::kCheckpointDir);
  const auto acc = evaluate(model, bundle);
  io::write_json(out / layout::kMetrics, to_json(acc));
  write_stamp(out, "eval", f);
  std::cout << "eval: acc_all = " << acc.acc_all;
  if (acc.acc_unbiased) std::cout << ", acc_unbiased = " << *acc.acc_unbiased << ", acc_biased = " << *acc.acc_biased;
  std::cout << " -> " << (out / layout::kMetrics).string() << "\n";
  return kExitOk;
}

// Numbers and booleans parse as JSON; anything else is taken as a string.
std::vector<json> parse_values(const std::string& text) {
  std::vector<json> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    json v = json::parse(item, nullptr, false);
    values.push_back(v.is_discarded() || v.is_object() || v.is_array() ? json(item) : v);
  }
  return values;
}

int cmd_ablate(const Shared& s, const std::string& axis, const std::string& values_text) {
  const fs::path out = s.out;
  const auto cfg = resolve_config(s);
  const json resolved = to_json(cfg);
  require_upstream(out, "generate", fragment(resolved, "generate"), out / layout::kBundleDir / "manifest.json");
  if (std::find(ablation_axes().begin(), ablation_axes().end(), axis) == ablation_axes().end()) {
    throw ConfigError("unknown ablation axis '" + axis + "'");
  }
  const auto values = parse_values(values_text);
  if (values.empty()) throw ConfigError("ablate: --values is empty");
  json f = fragment(resolved, "train");
  f["axis"] = axis;
  f["values"] = values;
  const auto dir = out / layout::kAblationDir / axis;
  const std::string stage = "ablate-" + axis;
  if (check_own(out, stage, f, dir / "grid.json", s.force) == Action::kSkip) return kExitOk;

  const auto bundle = load_bundle(out / layout::kBundleDir);
  const auto grid = run_ablation(bundle, axis, values, cfg);
  fs::remove_all(dir);
  save_grid(grid, dir);
  persist_config(out, cfg);
  write_stamp(out, stage, f);
  std::size_t failed = 0;
  for (const auto& run : grid.runs) {
    if (run.error) {
      ++failed;
      std::cerr << "ablate " << axis << "=" << run.value << ": " << *run.error << "\n";
    } else {
      std::cout << axis << "=" << run.value << ": acc_all " << run.manifest->final_metrics.acc_all;
      if (run.manifest->final_metrics.acc_unbiased) std::cout << ", acc_unbiased " << *run.manifest->final_metrics.acc_unbiased;
      std::cout << "\n";
    }
  }
  std::cout << "ablate: " << grid.runs.size() - failed << "/" << grid.runs.size() << " runs -> " << dir.string() << "\n";
  return kExitOk;
}

void collect(const fs::path& p, std::vector<RunManifest>& manifests) {
  if (fs::is_directory(p)) {
    if (!fs::exists(p / "grid.json")) throw MissingArtifactError("no grid.json in " + p.string());
    for (const auto& run : load_grid(p).runs) {
      if (run.manifest) manifests.push_back(*run.manifest);
    }
  } else if (fs::exists(p)) {
    manifests.push_back(load_manifest(p));
  } else {
    throw MissingArtifactError("missing " + p.string() + ": run train or ablate first");
  }
}

int cmd_report(const Shared& s, const std::vector<std::string>& inputs) {
  const fs::path out = s.out;
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  if (paths.empty()) {
    if (fs::exists(out / layout::kManifest)) paths.push_back(out / layout::kManifest);
    if (fs::is_directory(out / layout::kAblationDir)) {
      std::vector<fs::path> grids;
      for (const auto& e : fs::directory_iterator(out / layout::kAblationDir)) grids.push_back(e.path());
      std::sort(grids.begin(), grids.end());
      paths.insert(paths.end(), grids.begin(), grids.end());
    }
    if (paths.empty()) throw MissingArtifactError("no manifests under " + out.string() + ": run train or ablate first");
  }
  std::vector<RunManifest> manifests;
  for (const auto& p : paths) collect(p, manifests);

  ReportOptions opts;
  if (fs::exists(out / layout::kConfig)) {
    const auto cfg = load_experiment_config(out / layout::kConfig);
    const auto& f = cfg.evaluation.report_formats;
    auto has = [&](const char* x) { return std::find(f.begin(), f.end(), x) != f.end(); };
    opts = ReportOptions{has("csv"), has("json"), has("svg")};
  }
  std::optional<HistoryDiagnostics> diag;
  if (fs::exists(out / layout::kHistoryDir / "history.json")) {
    HistoryDiagnostics d{load_history(out / layout::kHistoryDir), {}};
    if (fs::exists(out / layout::kBundleDir / "manifest.json")) {
      const auto bundle = load_bundle(out / layout::kBundleDir);
      if (bundle.has_ground_truth()) d.aligned = train_aligned_flags(bundle);
    }
    diag = std::move(d);
  }

  json f = json::array();
  for (const auto& m : manifests) f.push_back(m.deterministic_view());
  const auto dir = out / layout::kReportDir;
  if (check_own(out, "report", f, dir, s.force) == Action::kSkip) return kExitOk;
  fs::remove_all(dir);
  const auto written = emit_report(manifests, dir, opts, diag);
  write_stamp(out, "report", f);
  for (const auto& p : written) std::cout << "report: " << p.string() << "\n";
  return kExitOk;
}

void add_shared(CLI::App& sub, Shared& s) {
  sub.add_option("--config", s.config_path, "Experiment config (JSON)");
  sub.add_option("--seed", s.seed, "Override the config seed");
  sub.add_option("--out", s.out, "Artifact directory")->capture_default_str();
  sub.add_flag("--force", s.force, "Overwrite artifacts produced with a different configuration");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Two-stage debiasing with learnable mixup", "debiasmix"};
  app.require_subcommand(1);
  Shared s;
  std::string axis;
  std::string values;
  std::vector<std::string> inputs;

  auto* gen = app.add_subcommand("generate", "Generate (or import) the dataset bundle");
  auto* ident = app.add_subcommand("identify", "Stage 1: split training data into bias / unbias subsets");
  auto* train = app.add_subcommand("train", "Stage 2: train the debiased model");
  auto* ev = app.add_subcommand("eval", "Group-wise accuracies of the trained checkpoint");
  auto* abl = app.add_subcommand("ablate", "Sweep one hyper-parameter axis");
  auto* rep = app.add_subcommand("report", "CSV / JSON / SVG report from manifests or grids");
  for (auto* sub : {gen, ident, train, ev, abl, rep}) add_shared(*sub, s);
  abl->add_option("--axis", axis, "gamma, M, zeta, omega, strategy or split_method")->required();
  abl->add_option("--values", values, "Comma-separated values")->required();
  rep->add_option("inputs", inputs, "Manifest files or grid directories");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(s);
    if (ident->parsed()) return cmd_identify(s);
    if (train->parsed()) return cmd_train(s);
    if (ev->parsed()) return cmd_eval(s);
    if (abl->parsed()) return cmd_ablate(s, axis, values);
    if (rep->parsed()) return cmd_report(s, inputs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const FormatError& e) {
    std::cerr << "unreadable artifact: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace debiasmix::cli
