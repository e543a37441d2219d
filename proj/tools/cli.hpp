#pragma once

#include <string>
#include <vector>

namespace debiasmix::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingArtifact = 3;
inline constexpr int kExitNumerical = 4;

// Artifact layout under --out.
namespace layout {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kBundleDir = "bundle";
inline constexpr const char* kSplit = "split.json";
inline constexpr const char* kHistoryDir = "history";
inline constexpr const char* kIdentifyInfo = "identify.json";
inline constexpr const char* kCheckpointDir = "checkpoint";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kAblationDir = "ablation";
inline constexpr const char* kReportDir = "report";
}  // namespace layout

// Parses argv (without the program name) and runs one command. Errors are
// printed to stderr and mapped to the exit codes above.
int run(const std::vector<std::string>& args);

}  // namespace debiasmix::cli
