#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "oneshot/errors.hpp"
#include "oneshot/evaluator.hpp"
#include "oneshot/trainer.hpp"

namespace oneshot {

// Shortest round-trip decimal form; keeps artifact files diffable.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view field, const std::string& context) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(context + ": cannot parse number \"" + std::string(field) + "\"");
  }
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current += c;
    }
  }
  fields.push_back(current);
  return fields;
}

inline std::string join_semicolon(const std::vector<double>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k > 0) out += ';';
    out += format_double(values[k]);
  }
  return out;
}

inline std::vector<double> parse_semicolon(std::string_view field, const std::string& context) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= field.size()) {
    const std::size_t stop = field.find(';', start);
    const std::string_view piece =
        field.substr(start, stop == std::string_view::npos ? std::string_view::npos : stop - start);
    values.push_back(parse_double(piece, context));
    if (stop == std::string_view::npos) break;
    start = stop + 1;
  }
  return values;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  return out;
}

constexpr const char* kSampleReportHeader = "sample_id,j,misreport,u1,revenue";
constexpr const char* kSweepSummaryHeader =
    "sigma,max_regret_misreporter,max_regret_truthful,min_revenue,beta,outperforming_count";
constexpr const char* kTraceHeader =
    "step,bidder,regret,revenue,lambda,grad_norm_pre,grad_norm_post";

inline void append_sample_report_rows(std::ostream& out, const SampleReport& report) {
  for (const auto& record : report.records) {
    out << report.sample_id << ',' << record.j << ',' << join_semicolon(record.report) << ',';
    if (record.failed) {
      out << "failed,failed";
    } else {
      out << format_double(record.u1) << ',' << format_double(record.revenue);
    }
    out << '\n';
  }
}

inline void write_sample_reports_csv(const std::string& path,
                                     const std::vector<SampleReport>& reports) {
  auto out = open_output(path);
  out << kSampleReportHeader << '\n';
  for (const auto& report : reports) append_sample_report_rows(out, report);
}

inline void write_sweep_summary_csv(const std::string& path, const SweepReport& sweep) {
  auto out = open_output(path);
  out << kSweepSummaryHeader << '\n';
  for (const auto& row : sweep.rows) {
    out << row.sigma_label << ',' << format_double(row.max_regret_misreporter) << ','
        << format_double(row.max_regret_truthful) << ',' << format_double(row.min_revenue) << ','
        << format_double(row.beta) << ',' << row.outperforming_count << '\n';
  }
}

inline void write_trace_csv(const std::string& path, const TrainingTrace& trace) {
  auto out = open_output(path);
  out << kTraceHeader << '\n';
  for (const auto& record : trace) {
    for (std::size_t i = 0; i < record.regrets.size(); ++i) {
      out << record.step << ',' << i << ',' << format_double(record.regrets[i]) << ','
          << format_double(record.revenue) << ',' << format_double(record.lambda[i]) << ','
          << format_double(record.grad_norm_pre[i]) << ','
          << format_double(record.grad_norm_post[i]) << '\n';
    }
  }
}

// Parsed sample-report row used by the report renderer. Failed rows carry
// ok = false instead of numbers.
struct SampleCsvRow {
  int sample_id = 0;
  int j = 0;
  std::vector<double> misreport;
  double u1 = 0.0;
  double revenue = 0.0;
  bool ok = true;
};

inline std::vector<SampleCsvRow> read_sample_reports_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  if (split_csv_line(line) != split_csv_line(kSampleReportHeader)) {
    throw ConfigError(path + " row 1: expected header \"" + kSampleReportHeader + "\"");
  }
  std::vector<SampleCsvRow> rows;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty()) continue;
    const std::string context = path + " row " + std::to_string(row_number);
    const auto fields = split_csv_line(line);
    if (fields.size() != 5) throw ConfigError(context + ": expected 5 fields");
    SampleCsvRow row;
    row.sample_id = static_cast<int>(parse_double(fields[0], context));
    row.j = static_cast<int>(parse_double(fields[1], context));
    row.misreport = parse_semicolon(fields[2], context);
    if (fields[3] == "failed" || fields[4] == "failed") {
      row.ok = false;
    } else {
      row.u1 = parse_double(fields[3], context);
      row.revenue = parse_double(fields[4], context);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace oneshot
