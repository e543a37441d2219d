#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "debiasmix/debias.hpp"
#include "debiasmix/history.hpp"

namespace debiasmix {

struct ReportRow {
  std::string run_id;
  std::string axis;
  std::string value;
  std::uint64_t seed = 0;
  double acc_all = 0.0;
  std::optional<double> acc_unbiased;
  std::optional<double> acc_biased;
  std::optional<double> split_f1;
  double wall_time = 0.0;

  bool operator==(const ReportRow&) const = default;
};

inline constexpr const char* kReportCsvHeader =
    "run_id,axis,value,seed,acc_all,acc_unbiased,acc_biased,split_f1,wall_time";

ReportRow report_row(const RunManifest& m);
std::string format_report_csv(const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_report_csv(const std::string& text);

// Optional stage-1 diagnostics for the histogram and correlation plots.
struct HistoryDiagnostics {
  PredictionHistory history;
  std::vector<bool> aligned;  // may be empty
};

struct ReportOptions {
  bool csv = true;
  bool json = true;
  bool svg = true;
};

// Writes report.csv, summary.json and SVG plots into `dir`; returns the
// written paths. Throws PreconditionError on an empty manifest list (nothing
// is written) and Error when the directory cannot be written.
std::vector<std::filesystem::path> emit_report(const std::vector<RunManifest>& manifests,
                                               const std::filesystem::path& dir, const ReportOptions& options = {},
                                               const std::optional<HistoryDiagnostics>& diagnostics = std::nullopt);

// Minimal deterministic SVG charts.
struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);
std::string svg_bar_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<double>& values);

}  // namespace debiasmix
