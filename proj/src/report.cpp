#include "ufgw/report.hpp"

#include <fstream>

#include "ufgw/errors.hpp"

namespace ufgw {

struct ReportWriter::Impl {
  std::ofstream out;
  std::string path;
  bool header_written = false;
};

ReportWriter::ReportWriter(const std::string& path) : impl_(new Impl) {
  impl_->path = path;
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw InputError("cannot write report: " + path);
  }
}

ReportWriter::~ReportWriter() { delete impl_; }

void ReportWriter::write_header(const std::string& command, const nlohmann::json& config) {
  if (impl_->header_written) throw InternalError("report header written twice");
  nlohmann::json header{{"schema", kReportSchema}, {"command", command}, {"config", config}};
  impl_->out << header.dump() << "\n";
  impl_->header_written = true;
}

void ReportWriter::write_record(const nlohmann::json& record) {
  if (!impl_->header_written) throw InternalError("report record before header");
  impl_->out << record.dump() << "\n";
}

void ReportWriter::close() {
  impl_->out.close();
  if (impl_->out.fail()) {
    throw InputError("failed writing report: " + impl_->path);
  }
}

std::vector<nlohmann::json> Report::records_of_type(const std::string& type) const {
  std::vector<nlohmann::json> out;
  for (const auto& r : records) {
    if (r.contains("type") && r.at("type") == type) out.push_back(r);
  }
  return out;
}

Report parse_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open report: " + path);
  Report report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (lineno == 1) {
      if (!obj.contains("schema") || obj.at("schema") != kReportSchema) {
        throw InputError(path + ": missing or unsupported schema field");
      }
      report.header = std::move(obj);
    } else {
      report.records.push_back(std::move(obj));
    }
  }
  if (report.header.is_null()) {
    throw InputError(path + ": empty report");
  }
  return report;
}

}  // namespace ufgw
