#include "debiasmix/models.hpp"

#include <cmath>
#include <cstring>

#include "debiasmix/errors.hpp"
#include "debiasmix/io.hpp"

namespace debiasmix {

std::vector<ag::Var> vars_of(const ParameterList& params) {
  std::vector<ag::Var> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.var);
  return out;
}

Linear::Linear(ag::Index in_dim, ag::Index out_dim, Rng& rng) {
  if (in_dim <= 0 || out_dim <= 0) throw ConfigError("Linear: dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  ag::Matrix w(in_dim, out_dim);
  for (ag::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  ag::Matrix b(1, out_dim);
  for (ag::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
  weight_ = ag::Var(std::move(w), true);
  bias_ = ag::Var(std::move(b), true);
}

ag::Var Linear::forward(const ag::Var& x) const { return ag::add_row(ag::matmul(x, weight_), bias_); }

void Linear::append_parameters(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

Mlp::Mlp(const std::vector<ag::Index>& widths, bool relu_on_output, Rng& rng) : relu_on_output_(relu_on_output) {
  if (widths.size() < 2) throw ConfigError("Mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers_.emplace_back(widths[i], widths[i + 1], rng);
}

ag::Var Mlp::forward(const ag::Var& x) const {
  ag::Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size() || relu_on_output_) h = ag::relu(h);
  }
  return h;
}

ag::Index Mlp::in_dim() const { return layers_.front().in_dim(); }
ag::Index Mlp::out_dim() const { return layers_.back().out_dim(); }

ParameterList Mlp::parameters(const std::string& prefix) const {
  ParameterList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].append_parameters(prefix + "." + std::to_string(i), out);
  }
  return out;
}

void ArchitectureConfig::validate() const {
  if (input_dim <= 0) throw ConfigError("architecture: input_dim must be positive");
  if (feature_dim <= 0) throw ConfigError("architecture: feature_dim must be positive");
  if (num_classes < 2) throw ConfigError("architecture: num_classes must be >= 2");
  if (!(beta_floor > 0)) throw ConfigError("architecture: beta_floor must be > 0");
  for (auto w : backbone_hidden) {
    if (w <= 0) throw ConfigError("architecture: hidden widths must be positive");
  }
  for (auto w : classifier_hidden) {
    if (w <= 0) throw ConfigError("architecture: hidden widths must be positive");
  }
  for (auto w : beta_hidden) {
    if (w <= 0) throw ConfigError("architecture: hidden widths must be positive");
  }
}

void to_json(nlohmann::json& j, const ArchitectureConfig& a) {
  j = nlohmann::json{{"input_dim", a.input_dim},
                     {"backbone_hidden", a.backbone_hidden},
                     {"feature_dim", a.feature_dim},
                     {"classifier_hidden", a.classifier_hidden},
                     {"num_classes", a.num_classes},
                     {"beta_hidden", a.beta_hidden},
                     {"beta_floor", a.beta_floor}};
}

void from_json(const nlohmann::json& j, ArchitectureConfig& a) {
  j.at("input_dim").get_to(a.input_dim);
  j.at("backbone_hidden").get_to(a.backbone_hidden);
  j.at("feature_dim").get_to(a.feature_dim);
  j.at("classifier_hidden").get_to(a.classifier_hidden);
  j.at("num_classes").get_to(a.num_classes);
  j.at("beta_hidden").get_to(a.beta_hidden);
  j.at("beta_floor").get_to(a.beta_floor);
}

namespace {

std::vector<ag::Index> chain(ag::Index in, const std::vector<ag::Index>& hidden, ag::Index out) {
  std::vector<ag::Index> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

FeatureExtractor::FeatureExtractor(const ArchitectureConfig& arch, Rng& rng)
    : net_(chain(arch.input_dim, arch.backbone_hidden, arch.feature_dim), true, rng) {}

ag::Var FeatureExtractor::forward(const ag::Var& x) const {
  if (x.cols() != input_dim()) {
    throw PreconditionError("feature extractor: expected " + std::to_string(input_dim()) + " input columns, got " +
                            std::to_string(x.cols()));
  }
  return net_.forward(x);
}

Classifier::Classifier(const ArchitectureConfig& arch, Rng& rng)
    : net_(chain(arch.feature_dim, arch.classifier_hidden, arch.num_classes), false, rng) {}

ag::Var Classifier::forward(const ag::Var& features) const {
  if (features.cols() != net_.in_dim()) throw PreconditionError("classifier: feature dimension mismatch");
  return net_.forward(features);
}

BetaParams beta_params_from_raw(const ag::Var& raw, double floor) {
  if (raw.cols() != 2) throw PreconditionError("beta params: raw output must have 2 columns");
  ag::Var positive = ag::add_scalar(ag::softplus(raw), floor);
  return {ag::column(positive, 0), ag::column(positive, 1)};
}

BetaParamNet::BetaParamNet(const ArchitectureConfig& arch, Rng& rng)
    : net_(chain(2 * arch.feature_dim, arch.beta_hidden, 2), false, rng), floor_(arch.beta_floor) {}

ag::Var BetaParamNet::raw(const ag::Var& feat1, const ag::Var& feat2) const {
  if (feat1.rows() != feat2.rows()) throw PreconditionError("beta net: feature batches differ in size");
  if (feat1.cols() + feat2.cols() != net_.in_dim()) throw PreconditionError("beta net: feature dimension mismatch");
  if (!feat1.value().allFinite() || !feat2.value().allFinite()) {
    throw NumericalError("beta net: non-finite input features");
  }
  return net_.forward(ag::concat_cols(ag::stop_gradient(feat1), ag::stop_gradient(feat2)));
}

BetaParams BetaParamNet::forward(const ag::Var& feat1, const ag::Var& feat2) const {
  return beta_params_from_raw(raw(feat1, feat2), floor_);
}

namespace {

Rng checked_init_rng(const ArchitectureConfig& arch, std::uint64_t seed) {
  arch.validate();
  return make_rng(seed, streams::kInit);
}

}  // namespace

// Members are initialized in declaration order from one rng stream.
ModelTriplet::ModelTriplet(const ArchitectureConfig& arch, std::uint64_t seed)
    : ModelTriplet(arch, checked_init_rng(arch, seed)) {}

ModelTriplet::ModelTriplet(const ArchitectureConfig& arch, Rng rng)
    : arch_(arch), features_(arch, rng), classifier_(arch, rng), beta_net_(arch, rng) {}

ag::Var ModelTriplet::logits(const ag::Var& x) const { return classifier_.forward(features_.forward(x)); }

ag::Matrix ModelTriplet::logits(const ag::Matrix& x) const { return logits(ag::Var(x)).value(); }

ModelTriplet ModelTriplet::clone() const {
  ModelTriplet copy(arch_, 0);
  auto src = all_parameters();
  auto dst = copy.all_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].var.mutable_value() = src[i].var.value();
  return copy;
}

ParameterList ModelTriplet::classification_parameters() const {
  ParameterList out = features_.parameters();
  for (auto& p : classifier_.parameters()) out.push_back(p);
  return out;
}

ParameterList ModelTriplet::all_parameters() const {
  ParameterList out = classification_parameters();
  for (auto& p : beta_net_.parameters()) out.push_back(p);
  return out;
}

void save_checkpoint(const ModelTriplet& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<double> payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& p : model.all_parameters()) {
    const auto& v = p.var.value();
    table.push_back({{"name", p.name}, {"rows", v.rows()}, {"cols", v.cols()}, {"offset", payload.size()}});
    payload.insert(payload.end(), v.data(), v.data() + v.size());
  }
  const auto crc = io::write_blob(dir / "checkpoint.bin", io::as_bytes(payload));
  nlohmann::json manifest{{"schema_version", io::kSchemaVersion},
                          {"architecture", model.arch()},
                          {"dtype", "float64"},
                          {"count", payload.size()},
                          {"crc32", crc},
                          {"parameters", table}};
  io::write_json(dir / "checkpoint.json", manifest);
}

ModelTriplet load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = io::read_json(dir / "checkpoint.json");
  io::check_schema(manifest, "checkpoint");
  ArchitectureConfig arch;
  try {
    arch = manifest.at("architecture").get<ArchitectureConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad architecture: ") + e.what());
  }
  const auto count = manifest.at("count").get<std::size_t>();
  const auto bytes = io::read_blob(dir / "checkpoint.bin", count * sizeof(double), manifest.at("crc32").get<std::uint32_t>());
  std::vector<double> payload(count);
  std::memcpy(payload.data(), bytes.data(), bytes.size());

  ModelTriplet model(arch, 0);
  auto params = model.all_parameters();
  const auto& table = manifest.at("parameters");
  if (table.size() != params.size()) throw FormatError("checkpoint: parameter count does not match architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = table[i];
    auto& value = params[i].var.mutable_value();
    if (entry.at("name").get<std::string>() != params[i].name || entry.at("rows").get<ag::Index>() != value.rows() ||
        entry.at("cols").get<ag::Index>() != value.cols()) {
      throw FormatError("checkpoint: parameter table mismatch at " + params[i].name);
    }
    const auto offset = entry.at("offset").get<std::size_t>();
    if (offset + static_cast<std::size_t>(value.size()) > count) throw FormatError("checkpoint: offset out of range");
    std::memcpy(value.data(), payload.data() + offset, sizeof(double) * static_cast<std::size_t>(value.size()));
  }
  return model;
}

}  // namespace debiasmix
