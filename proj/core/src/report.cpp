#include "debiasmix/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "debiasmix/diagnostics.hpp"
#include "debiasmix/errors.hpp"
#include "debiasmix/io.hpp"

namespace debiasmix {

ReportRow report_row(const RunManifest& m) {
  ReportRow r;
  r.run_id = m.run_id;
  r.axis = m.axis;
  r.value = m.value;
  r.seed = m.seed;
  r.acc_all = m.final_metrics.acc_all;
  r.acc_unbiased = m.final_metrics.acc_unbiased;
  r.acc_biased = m.final_metrics.acc_biased;
  if (m.split.contains("f1") && !m.split.at("f1").is_null()) r.split_f1 = m.split.at("f1").get<double>();
  r.wall_time = m.wall_time;
  return r;
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> opt_num(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 160, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string frame(const std::string& title, const std::string& x_label, const std::string& y_label, double x0,
                  double x1, double y0, double y1) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
     << "</text>\n";
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fy = k / 4.0;
    const double y = kTop + ph * (1 - fy);
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
       << fixed(y0 + fy * (y1 - y0)) << "</text>\n";
    const double x = kLeft + pw * fy;
    os << "<text x=\"" << x << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << fixed(x0 + fy * (x1 - x0), 1) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << xml_escape(x_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
     << kTop + ph / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

std::string format_report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << kReportCsvHeader << "\n";
  for (const auto& r : rows) {
    os << csv_field(r.run_id) << "," << csv_field(r.axis) << "," << csv_field(r.value) << "," << r.seed << ","
       << num(r.acc_all) << "," << num(r.acc_unbiased) << "," << num(r.acc_biased) << "," << num(r.split_f1) << ","
       << num(r.wall_time) << "\n";
  }
  return os.str();
}

std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) throw FormatError("report csv: unexpected header");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) throw FormatError("report csv: expected 9 fields");
    ReportRow r;
    r.run_id = f[0];
    r.axis = f[1];
    r.value = f[2];
    r.seed = std::stoull(f[3]);
    r.acc_all = std::stod(f[4]);
    r.acc_unbiased = opt_num(f[5]);
    r.acc_biased = opt_num(f[6]);
    r.split_f1 = opt_num(f[7]);
    r.wall_time = std::stod(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  std::ostringstream os;
  os << frame(title, x_label, y_label, x0, x1, y0, y1);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % 10];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[k].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      os << fixed(kLeft + pw * (x - x0) / (x1 - x0)) << "," << fixed(kTop + ph * (1 - (y - y0) / (y1 - y0))) << " ";
    }
    os << "\"/>\n";
    const double ly = kTop + 14 + 16 * static_cast<double>(k);
    os << "<rect x=\"" << kW - kRight + 10 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << color
       << "\"/>\n";
    os << "<text x=\"" << kW - kRight + 24 << "\" y=\"" << ly << "\" font-size=\"11\">" << xml_escape(series[k].name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_bar_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<double>& values) {
  double y1 = 0;
  for (double v : values) y1 = std::max(y1, v);
  if (y1 == 0) y1 = 1;
  const double n = std::max<double>(1.0, static_cast<double>(values.size()));
  std::ostringstream os;
  os << frame(title, x_label, y_label, 0, n - 1, 0, y1);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  const double bw = pw / n;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double h = ph * values[k] / y1;
    os << "<rect x=\"" << fixed(kLeft + bw * static_cast<double>(k) + 1) << "\" y=\"" << fixed(kTop + ph - h)
       << "\" width=\"" << fixed(std::max(bw - 2, 1.0)) << "\" height=\"" << fixed(h) << "\" fill=\"" << kPalette[0]
       << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::filesystem::path> emit_report(const std::vector<RunManifest>& manifests,
                                               const std::filesystem::path& dir, const ReportOptions& options,
                                               const std::optional<HistoryDiagnostics>& diagnostics) {
  if (manifests.empty()) throw PreconditionError("report: no manifests given");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("report: cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  std::vector<ReportRow> rows;
  for (const auto& m : manifests) rows.push_back(report_row(m));

  if (options.csv) {
    write_text(dir / "report.csv", format_report_csv(rows));
    written.push_back(dir / "report.csv");
  }
  if (options.json) {
    nlohmann::json runs = nlohmann::json::array();
    std::map<std::string, std::vector<const ReportRow*>> by_value;
    for (const auto& r : rows) {
      runs.push_back({{"run_id", r.run_id},
                      {"axis", r.axis},
                      {"value", r.value},
                      {"seed", r.seed},
                      {"acc_all", r.acc_all},
                      {"acc_unbiased", r.acc_unbiased ? nlohmann::json(*r.acc_unbiased) : nlohmann::json(nullptr)},
                      {"acc_biased", r.acc_biased ? nlohmann::json(*r.acc_biased) : nlohmann::json(nullptr)},
                      {"split_f1", r.split_f1 ? nlohmann::json(*r.split_f1) : nlohmann::json(nullptr)}});
      by_value[r.axis + "=" + r.value].push_back(&r);
    }
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& [key, members] : by_value) {
      double all = 0, unb = 0;
      std::size_t n_unb = 0;
      for (const auto* r : members) {
        all += r->acc_all;
        if (r->acc_unbiased) {
          unb += *r->acc_unbiased;
          ++n_unb;
        }
      }
      groups[key] = {{"runs", members.size()},
                     {"mean_acc_all", all / static_cast<double>(members.size())},
                     {"mean_acc_unbiased", n_unb ? nlohmann::json(unb / static_cast<double>(n_unb)) : nlohmann::json(nullptr)}};
    }
    io::write_json(dir / "summary.json", {{"schema_version", io::kSchemaVersion}, {"runs", runs}, {"groups", groups}});
    written.push_back(dir / "summary.json");
  }
  if (options.svg) {
    std::vector<Series> acc, loss;
    for (const auto& m : manifests) {
      const std::string name = m.run_id.empty() ? m.method : m.run_id;
      Series s{name, {}};
      Series la{name + " aligned", {}}, lc{name + " conflicting", {}};
      for (const auto& e : m.epochs) {
        if (e.acc_unbiased) s.points.emplace_back(e.epoch, *e.acc_unbiased);
        if (e.loss_aligned) la.points.emplace_back(e.epoch, *e.loss_aligned);
        if (e.loss_conflicting) lc.points.emplace_back(e.epoch, *e.loss_conflicting);
      }
      acc.push_back(std::move(s));
      if (!la.points.empty()) loss.push_back(std::move(la));
      if (!lc.points.empty()) loss.push_back(std::move(lc));
    }
    write_text(dir / "accuracy_curves.svg", svg_line_chart("Unbiased test accuracy", "epoch", "accuracy", acc));
    written.push_back(dir / "accuracy_curves.svg");
    if (!loss.empty()) {
      write_text(dir / "loss_curves.svg", svg_line_chart("Training loss by ground-truth group", "epoch", "CE", loss));
      written.push_back(dir / "loss_curves.svg");
    }
    if (diagnostics) {
      const auto& h = diagnostics->history;
      const auto bins = ranking_histogram(h.ranking(), static_cast<int>(h.epochs()));
      write_text(dir / "ranking_histogram.svg",
                 svg_bar_chart("Ranking histogram", "correct epochs", "samples",
                               std::vector<double>(bins.begin(), bins.end())));
      written.push_back(dir / "ranking_histogram.svg");
      if (!diagnostics->aligned.empty()) {
        const auto rho = bias_correlation(h, diagnostics->aligned);
        Series corr{"pearson", {}}, acc_s{"train accuracy", {}};
        for (std::size_t t = 0; t < rho.size(); ++t) {
          if (rho[t]) corr.points.emplace_back(static_cast<double>(t + 1), *rho[t]);
          acc_s.points.emplace_back(static_cast<double>(t + 1), h.accuracy(t));
        }
        write_text(dir / "bias_correlation.svg",
                   svg_line_chart("Correctness vs aligned flag", "epoch", "value", {corr, acc_s}));
        written.push_back(dir / "bias_correlation.svg");
      }
    }
  }
  return written;
}

}  // namespace debiasmix
