#pragma once

#include "sck/cli/config.hpp"

#include <string>
#include <vector>

namespace sck::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Numerical payload of one subcommand plus its CSV view.
struct Report {
  json payload = json::object();
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;
};

const std::vector<std::string>& subcommands();

/// Runs one analysis. Library errors propagate.
Report run(const std::string& subcommand, const RunConfig& cfg);

/// Full JSON document with tool, meta, config, seed and payload.
json report_document(const std::string& subcommand, const RunConfig& cfg, const Report& report,
                     double duration_s, int threads);

/// CSV text: metadata as '#' comment lines, then the fixed header and rows.
std::string report_csv(const std::string& subcommand, const RunConfig& cfg, const Report& report,
                       double duration_s, int threads);

/// "%.17g", which round-trips every finite double.
std::string format_double(double x);

/// Process entry point; returns the exit status.
///  0 analysis done, 1 input error, 2 numerical failure or I/O error.
int main_entry(int argc, char** argv);

}  // namespace sck::cli
