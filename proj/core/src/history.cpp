#include "debiasmix/history.hpp"

#include "debiasmix/errors.hpp"
#include "debiasmix/io.hpp"

namespace debiasmix {

void PredictionHistory::append_epoch(const std::vector<bool>& correct) {
  if (correct.size() != num_samples_) {
    throw PreconditionError("history: epoch column has " + std::to_string(correct.size()) + " entries, expected " +
                            std::to_string(num_samples_));
  }
  columns_.push_back(correct);
}

std::vector<int> PredictionHistory::window_sums(std::size_t first, std::size_t last) const {
  if (first > last || last > epochs()) throw PreconditionError("history: invalid epoch window");
  std::vector<int> sums(num_samples_, 0);
  for (std::size_t t = first; t < last; ++t) {
    for (std::size_t i = 0; i < num_samples_; ++i) sums[i] += columns_[t][i];
  }
  return sums;
}

double PredictionHistory::accuracy(std::size_t t) const {
  if (num_samples_ == 0) return 0.0;
  std::size_t hits = 0;
  for (bool b : column(t)) hits += b;
  return static_cast<double>(hits) / static_cast<double>(num_samples_);
}

void save_history(const PredictionHistory& h, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t N = h.num_samples();
  const std::size_t K = h.epochs();
  std::vector<std::uint8_t> packed((N * K + 7) / 8, 0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t t = 0; t < K; ++t) {
      const std::size_t bit = i * K + t;
      if (h.at(i, t)) packed[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
  }
  const auto crc = io::write_blob(dir / "history.bin", io::as_bytes(packed));
  io::write_json(dir / "history.json",
                 {{"schema_version", io::kSchemaVersion}, {"N", N}, {"K", K}, {"layout", "row-major bits, LSB first"},
                  {"crc32", crc}});
}

PredictionHistory load_history(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "history.json")) {
    throw MissingArtifactError("no prediction history at " + dir.string());
  }
  const auto j = io::read_json(dir / "history.json");
  io::check_schema(j, "history");
  std::size_t N = 0, K = 0;
  std::uint32_t crc = 0;
  try {
    N = j.at("N").get<std::size_t>();
    K = j.at("K").get<std::size_t>();
    crc = j.at("crc32").get<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("history: ") + e.what());
  }
  const auto bytes = io::read_blob(dir / "history.bin", (N * K + 7) / 8, crc);
  PredictionHistory h(N);
  for (std::size_t t = 0; t < K; ++t) {
    std::vector<bool> col(N);
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t bit = i * K + t;
      col[i] = (std::to_integer<unsigned>(bytes[bit / 8]) >> (bit % 8)) & 1u;
    }
    h.append_epoch(col);
  }
  return h;
}

}  // namespace debiasmix
