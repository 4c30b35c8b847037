#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ufgw {

// Report files are JSON lines: a header object first, then one object per
// record, each carrying a "type" field. Streamable and diff-able; the writer
// emits keys in sorted order so identical runs produce identical bytes.
inline constexpr const char* kReportSchema = "ufgw-report/1";

class ReportWriter {
 public:
  explicit ReportWriter(const std::string& path);
  ~ReportWriter();
  ReportWriter(const ReportWriter&) = delete;
  ReportWriter& operator=(const ReportWriter&) = delete;

  // First line: {"schema":..., "command":..., "config":...}
  void write_header(const std::string& command, const nlohmann::json& config);
  void write_record(const nlohmann::json& record);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

struct Report {
  nlohmann::json header;
  std::vector<nlohmann::json> records;

  std::vector<nlohmann::json> records_of_type(const std::string& type) const;
};

// Parses and validates a report file (schema field, one JSON object per line).
Report parse_report(const std::string& path);

}  // namespace ufgw
