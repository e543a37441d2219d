#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace debiasmix::io {

inline constexpr int kSchemaVersion = 1;

std::uint32_t crc32(std::span<const std::byte> bytes);

// Writes raw bytes; returns their CRC-32.
std::uint32_t write_blob(const std::filesystem::path& path, std::span<const std::byte> bytes);

// Reads exactly `expected_size` bytes and verifies the CRC-32. Throws
// FormatError on size or checksum mismatch, MissingArtifactError if absent.
std::vector<std::byte> read_blob(const std::filesystem::path& path, std::size_t expected_size,
                                 std::uint32_t expected_crc);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Throws FormatError unless j["schema_version"] == kSchemaVersion.
void check_schema(const nlohmann::json& j, const std::string& what);

template <typename T>
std::span<const std::byte> as_bytes(const std::vector<T>& v) {
  return std::as_bytes(std::span<const T>(v));
}

}  // namespace debiasmix::io
