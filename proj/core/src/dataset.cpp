#include "debiasmix/dataset.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "debiasmix/errors.hpp"
#include "debiasmix/io.hpp"
#include "debiasmix/rng.hpp"

namespace debiasmix {

void GeneratorConfig::validate() const {
  if (num_classes < 2) throw ConfigError("generator: num_classes must be >= 2");
  if (n_per_class < 10) throw ConfigError("generator: n_per_class must be >= 10");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("generator: rho must lie in (0, 1]");
  if (image_size < 1 || channels < 1) throw ConfigError("generator: image shape must be positive");
  if (test_per_cell < 1) throw ConfigError("generator: test_per_cell must be >= 1");
  if (!(corruption_strength >= 0) || !(class_signal >= 0) || !(noise_std >= 0) || !(texture_std >= 0)) {
    throw ConfigError("generator: strengths must be non-negative");
  }
  if (!(severity_jitter >= 0.0 && severity_jitter <= 1.0)) {
    throw ConfigError("generator: severity_jitter must lie in [0, 1]");
  }
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{{"num_classes", c.num_classes},
                     {"n_per_class", c.n_per_class},
                     {"rho", c.rho},
                     {"corruption_strength", c.corruption_strength},
                     {"image_size", c.image_size},
                     {"channels", c.channels},
                     {"test_per_cell", c.test_per_cell},
                     {"class_signal", c.class_signal},
                     {"noise_std", c.noise_std},
                     {"texture_std", c.texture_std},
                     {"severity_jitter", c.severity_jitter},
                     {"appearance_seed", c.appearance_seed}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.num_classes = j.value("num_classes", d.num_classes);
  c.n_per_class = j.value("n_per_class", d.n_per_class);
  c.rho = j.value("rho", d.rho);
  c.corruption_strength = j.value("corruption_strength", d.corruption_strength);
  c.image_size = j.value("image_size", d.image_size);
  c.channels = j.value("channels", d.channels);
  c.test_per_cell = j.value("test_per_cell", d.test_per_cell);
  c.class_signal = j.value("class_signal", d.class_signal);
  c.noise_std = j.value("noise_std", d.noise_std);
  c.texture_std = j.value("texture_std", d.texture_std);
  c.severity_jitter = j.value("severity_jitter", d.severity_jitter);
  c.appearance_seed = j.value("appearance_seed", d.appearance_seed);
}

bool DatasetBundle::has_ground_truth() const {
  for (const auto* part : {&train, &test}) {
    for (const auto& s : *part) {
      if (!s.bias_domain) return false;
    }
  }
  return !train.empty();
}

std::vector<bool> aligned_flags(const DatasetBundle& bundle, std::span<const Sample> samples) {
  std::vector<bool> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.bias_domain) throw PreconditionError("ground-truth bias domains are absent");
    out.push_back(*s.bias_domain == bundle.privileged_domains.at(static_cast<std::size_t>(s.class_label)));
  }
  return out;
}

std::vector<bool> train_aligned_flags(const DatasetBundle& bundle) { return aligned_flags(bundle, bundle.train); }

namespace {

struct Appearance {
  std::vector<std::vector<double>> templates;  // per class, H*W
  std::vector<std::vector<double>> corruption;  // per domain, C*H*W
};

// Orthonormalizes the rows of m (Gram-Schmidt via QR) and rescales each to
// `norm`. Rows must be fewer than columns.
void orthogonalize_rows(std::vector<std::vector<double>>& rows, double norm) {
  if (rows.empty()) return;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto dim = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(dim, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < dim; ++i) m(i, k) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, n);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k) {
    // Keep each direction's orientation close to the original draw.
    const double sign = r(k, k) < 0 ? -1.0 : 1.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = sign * norm * q(i, k);
    }
  }
}

// Class templates are mutually orthogonal with RMS amplitude class_signal;
// domain corruptions (tint plus texture) are mutually orthogonal with a
// common norm equal to the expected norm of the unprocessed draw.
Appearance make_appearance(const GeneratorConfig& c) {
  Rng rng = make_rng(c.appearance_seed, streams::kAppearance);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t plane = static_cast<std::size_t>(c.image_size) * c.image_size;
  const std::size_t flat = plane * static_cast<std::size_t>(c.channels);
  Appearance a;
  for (int k = 0; k < c.num_classes; ++k) {
    std::vector<double> t(plane);
    for (auto& v : t) v = normal(rng);
    a.templates.push_back(std::move(t));
  }
  for (int d = 0; d < c.num_classes; ++d) {
    std::vector<double> tint(static_cast<std::size_t>(c.channels));
    double norm = 0.0;
    for (auto& v : tint) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    std::vector<double> corr(flat);
    for (int ch = 0; ch < c.channels; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) corr[ch * plane + p] = tint[ch] / norm + c.texture_std * normal(rng);
    }
    a.corruption.push_back(std::move(corr));
  }
  if (static_cast<std::size_t>(c.num_classes) <= plane) {
    orthogonalize_rows(a.templates, c.class_signal * std::sqrt(static_cast<double>(plane)));
  } else {
    for (auto& t : a.templates) {
      for (auto& v : t) v *= c.class_signal;
    }
  }
  const double corr_norm =
      c.corruption_strength * std::sqrt(static_cast<double>(plane) + c.texture_std * c.texture_std * flat);
  if (static_cast<std::size_t>(c.num_classes) <= flat) {
    orthogonalize_rows(a.corruption, corr_norm);
  } else {
    for (auto& t : a.corruption) {
      for (auto& v : t) v *= c.corruption_strength;
    }
  }
  return a;
}

Sample render(const GeneratorConfig& c, const Appearance& a, int cls, int domain, std::size_t index, Rng& rng) {
  std::normal_distribution<double> normal(0.0, c.noise_std);
  std::uniform_real_distribution<double> severity_draw(1.0 - c.severity_jitter, 1.0 + c.severity_jitter);
  const double severity = c.severity_jitter > 0 ? severity_draw(rng) : 1.0;
  const std::size_t plane = static_cast<std::size_t>(c.image_size) * c.image_size;
  Sample s;
  s.index = index;
  s.class_label = cls;
  s.bias_domain = domain;
  s.features.resize(plane * c.channels);
  const auto& tmpl = a.templates[static_cast<std::size_t>(cls)];
  const auto& corr = a.corruption[static_cast<std::size_t>(domain)];
  for (int ch = 0; ch < c.channels; ++ch) {
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t k = ch * plane + p;
      s.features[k] = static_cast<float>(tmpl[p] + normal(rng) + severity * corr[k]);
    }
  }
  return s;
}

}  // namespace

DatasetBundle generate_synthetic_biased(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  const Appearance appearance = make_appearance(config);
  Rng rng = make_rng(seed, streams::kGenerator);
  const int C = config.num_classes;

  DatasetBundle b;
  b.num_classes = C;
  b.num_domains = C;
  b.rho = config.rho;
  b.shape = {config.channels, config.image_size, config.image_size};
  b.generator = config;
  b.seed = seed;
  for (int k = 0; k < C; ++k) b.privileged_domains.push_back(k);

  const int n_aligned = static_cast<int>(std::lround(config.rho * config.n_per_class));
  std::uniform_int_distribution<int> other(0, C - 2);
  for (int cls = 0; cls < C; ++cls) {
    for (int k = 0; k < config.n_per_class; ++k) {
      int domain = cls;
      if (k >= n_aligned) {
        domain = other(rng);
        if (domain >= cls) ++domain;
      }
      b.train.push_back(render(config, appearance, cls, domain, b.train.size(), rng));
    }
  }
  for (int cls = 0; cls < C; ++cls) {
    for (int domain = 0; domain < C; ++domain) {
      for (int k = 0; k < config.test_per_cell; ++k) {
        b.test.push_back(render(config, appearance, cls, domain, b.test.size(), rng));
      }
    }
  }
  if (n_aligned == config.n_per_class) {
    b.warnings.push_back("no bias-conflicting training samples: every class is fully aligned (rho rounds to 1)");
  }
  return b;
}

namespace {

std::vector<Sample> to_samples(const ExternalPartition& part, std::size_t dim, int num_classes, int num_domains) {
  if (part.features.size() != part.labels.size() * dim) {
    throw PreconditionError("ingest: feature array size does not match labels x shape");
  }
  if (part.domains && part.domains->size() != part.labels.size()) {
    throw PreconditionError("ingest: domain array length does not match labels");
  }
  std::vector<Sample> out;
  for (std::size_t i = 0; i < part.labels.size(); ++i) {
    Sample s;
    s.index = i;
    s.class_label = part.labels[i];
    if (s.class_label < 0 || s.class_label >= num_classes) throw PreconditionError("ingest: label out of range");
    s.features.assign(part.features.begin() + static_cast<std::ptrdiff_t>(i * dim),
                      part.features.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    for (float v : s.features) {
      if (!std::isfinite(v)) throw PreconditionError("ingest: non-finite feature value");
    }
    if (part.domains) {
      const int d = (*part.domains)[i];
      if (d < 0 || d >= num_domains) throw PreconditionError("ingest: domain out of range");
      s.bias_domain = d;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

DatasetBundle ingest_arrays(const ExternalPartition& train, const ExternalPartition& test, ImageShape shape,
                            int num_classes, int num_domains, std::vector<int> privileged_domains) {
  if (num_classes < 2) throw PreconditionError("ingest: need at least two classes");
  DatasetBundle b;
  b.num_classes = num_classes;
  b.num_domains = num_domains;
  b.shape = shape;
  b.train = to_samples(train, shape.flat_size(), num_classes, num_domains);
  b.test = to_samples(test, shape.flat_size(), num_classes, num_domains);
  if (privileged_domains.empty()) {
    for (int k = 0; k < num_classes; ++k) privileged_domains.push_back(k % std::max(num_domains, 1));
  }
  if (static_cast<int>(privileged_domains.size()) != num_classes) {
    throw PreconditionError("ingest: privileged_domains must list one domain per class");
  }
  b.privileged_domains = std::move(privileged_domains);
  b.rho = 1.0;
  if (train.domains && !b.train.empty()) {
    const auto flags = train_aligned_flags(b);
    std::size_t aligned = 0;
    for (bool f : flags) aligned += f;
    b.rho = static_cast<double>(aligned) / static_cast<double>(flags.size());
  }
  return b;
}

namespace {

std::vector<float> flatten(const std::vector<Sample>& samples, std::size_t dim) {
  std::vector<float> out;
  out.reserve(samples.size() * dim);
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw PreconditionError("save_bundle: sample feature size mismatch");
    out.insert(out.end(), s.features.begin(), s.features.end());
  }
  return out;
}

nlohmann::json partition_meta(const std::vector<Sample>& samples, std::uint32_t crc) {
  nlohmann::json labels = nlohmann::json::array();
  nlohmann::json domains = nlohmann::json::array();
  nlohmann::json indices = nlohmann::json::array();
  for (const auto& s : samples) {
    indices.push_back(s.index);
    labels.push_back(s.class_label);
    domains.push_back(s.bias_domain ? nlohmann::json(*s.bias_domain) : nlohmann::json(nullptr));
  }
  return {{"count", samples.size()}, {"crc32", crc}, {"indices", indices}, {"labels", labels}, {"domains", domains}};
}

std::vector<Sample> read_partition(const std::filesystem::path& bin, const nlohmann::json& meta, std::size_t dim) {
  const auto count = meta.at("count").get<std::size_t>();
  const auto bytes = io::read_blob(bin, count * dim * sizeof(float), meta.at("crc32").get<std::uint32_t>());
  const auto& indices = meta.at("indices");
  const auto& labels = meta.at("labels");
  const auto& domains = meta.at("domains");
  if (indices.size() != count || labels.size() != count || domains.size() != count) {
    throw FormatError(bin.string() + ": manifest arrays disagree with sample count");
  }
  std::vector<Sample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& s = out[i];
    s.index = indices[i].get<std::size_t>();
    s.class_label = labels[i].get<int>();
    if (!domains[i].is_null()) s.bias_domain = domains[i].get<int>();
    s.features.resize(dim);
    std::memcpy(s.features.data(), bytes.data() + i * dim * sizeof(float), dim * sizeof(float));
  }
  return out;
}

}  // namespace

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t dim = bundle.feature_dim();
  const auto train_crc = io::write_blob(dir / "train.bin", io::as_bytes(flatten(bundle.train, dim)));
  const auto test_crc = io::write_blob(dir / "test.bin", io::as_bytes(flatten(bundle.test, dim)));
  nlohmann::json m{{"schema_version", io::kSchemaVersion},
                   {"C", bundle.num_classes},
                   {"D", bundle.num_domains},
                   {"rho", bundle.rho},
                   {"seed", bundle.seed},
                   {"shapes",
                    {{"channels", bundle.shape.channels},
                     {"height", bundle.shape.height},
                     {"width", bundle.shape.width},
                     {"train", bundle.train.size()},
                     {"test", bundle.test.size()}}},
                   {"has_ground_truth", bundle.has_ground_truth()},
                   {"privileged_domains", bundle.privileged_domains},
                   {"generator", bundle.generator ? nlohmann::json(*bundle.generator) : nlohmann::json(nullptr)},
                   {"warnings", bundle.warnings},
                   {"dtype", "float32"},
                   {"train", partition_meta(bundle.train, train_crc)},
                   {"test", partition_meta(bundle.test, test_crc)}};
  io::write_json(dir / "manifest.json", m);
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json")) {
    throw MissingArtifactError("no dataset bundle at " + dir.string() + " (run generate first)");
  }
  const auto m = io::read_json(dir / "manifest.json");
  io::check_schema(m, "bundle manifest");
  try {
    DatasetBundle b;
    b.num_classes = m.at("C").get<int>();
    b.num_domains = m.at("D").get<int>();
    b.rho = m.at("rho").get<double>();
    b.seed = m.at("seed").get<std::uint64_t>();
    const auto& shapes = m.at("shapes");
    b.shape = {shapes.at("channels").get<int>(), shapes.at("height").get<int>(), shapes.at("width").get<int>()};
    b.privileged_domains = m.at("privileged_domains").get<std::vector<int>>();
    if (!m.at("generator").is_null()) b.generator = m.at("generator").get<GeneratorConfig>();
    b.warnings = m.at("warnings").get<std::vector<std::string>>();
    b.train = read_partition(dir / "train.bin", m.at("train"), b.feature_dim());
    b.test = read_partition(dir / "test.bin", m.at("test"), b.feature_dim());
    if (b.train.size() != shapes.at("train").get<std::size_t>() || b.test.size() != shapes.at("test").get<std::size_t>()) {
      throw FormatError("bundle manifest: shapes disagree with partitions");
    }
    if (m.at("has_ground_truth").get<bool>() != b.has_ground_truth()) {
      throw FormatError("bundle manifest: has_ground_truth disagrees with domain arrays");
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bundle manifest: ") + e.what());
  }
}

ag::Matrix gather_features(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) return ag::Matrix(0, samples.empty() ? 0 : static_cast<ag::Index>(samples[0].features.size()));
  const auto dim = static_cast<ag::Index>(samples[indices[0]].features.size());
  ag::Matrix out(static_cast<ag::Index>(indices.size()), dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& f = samples[indices[r]].features;
    for (ag::Index k = 0; k < dim; ++k) out(static_cast<ag::Index>(r), k) = f[static_cast<std::size_t>(k)];
  }
  return out;
}

ag::Matrix all_features(std::span<const Sample> samples) {
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather_features(samples, idx);
}

ag::Matrix one_hot(std::span<const int> labels, int num_classes) {
  ag::Matrix out = ag::Matrix::Zero(static_cast<ag::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw PreconditionError("one_hot: label out of range");
    out(static_cast<ag::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

std::vector<int> gather_labels(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(samples[i].class_label);
  return out;
}

std::vector<int> all_labels(std::span<const Sample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.class_label);
  return out;
}

}  // namespace debiasmix
