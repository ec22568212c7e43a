#include "sck/cli/run.hpp"

#include <cstdio>
#include <sstream>

namespace sck::cli {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json report_document(const std::string& subcommand, const RunConfig& cfg, const Report& report,
                     double duration_s, int threads) {
  json doc = json::object();
  doc["tool"] = {{"name", "sck"}, {"version", kToolVersion}};
  doc["subcommand"] = subcommand;
  doc["meta"] = {{"duration_s", duration_s}, {"threads", threads}};
  doc["config"] = cfg.resolved;
  doc["seed"] = cfg.sim ? json(cfg.sim->seed) : json(nullptr);
  doc["payload"] = report.payload;
  return doc;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string report_csv(const std::string& subcommand, const RunConfig& cfg, const Report& report,
                       double duration_s, int threads) {
  std::ostringstream os;
  os << "# tool: sck " << kToolVersion << "\n";
  os << "# subcommand: " << subcommand << "\n";
  os << "# seed: " << (cfg.sim ? std::to_string(cfg.sim->seed) : std::string("none")) << "\n";
  os << "# duration_s: " << format_double(duration_s) << "\n";
  os << "# threads: " << threads << "\n";
  os << "# config: " << cfg.resolved.dump() << "\n";
  for (std::size_t i = 0; i < report.csv_header.size(); ++i)
    os << (i ? "," : "") << csv_field(report.csv_header[i]);
  os << "\n";
  for (const auto& row : report.csv_rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(row[i]);
    os << "\n";
  }
  return os.str();
}

}  // namespace sck::cli
