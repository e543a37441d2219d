#include "debiasmix/io.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>

#include "debiasmix/errors.hpp"

namespace debiasmix::io {

std::uint32_t crc32(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + offset), static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t write_blob(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
  return crc32(bytes);
}

std::vector<std::byte> read_blob(const std::filesystem::path& path, std::size_t expected_size,
                                 std::uint32_t expected_crc) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("missing file: " + path.string());
  const auto actual_size = std::filesystem::file_size(path);
  if (actual_size != expected_size) {
    throw FormatError(path.string() + ": expected " + std::to_string(expected_size) + " bytes, found " +
                      std::to_string(actual_size) + " (truncated or corrupt)");
  }
  std::vector<std::byte> bytes(expected_size);
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(expected_size));
  if (!in) throw FormatError("read failed: " + path.string());
  if (crc32(bytes) != expected_crc) throw FormatError(path.string() + ": checksum mismatch");
  return bytes;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("missing file: " + path.string());
  std::ifstream in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
}

void check_schema(const nlohmann::json& j, const std::string& what) {
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
    throw FormatError(what + ": missing schema_version");
  }
  const int v = j["schema_version"].get<int>();
  if (v != kSchemaVersion) {
    throw FormatError(what + ": schema_version " + std::to_string(v) + " unsupported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
}

}  // namespace debiasmix::io
