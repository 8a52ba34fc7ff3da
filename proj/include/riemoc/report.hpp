#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace riemoc::cli {

/// Machine-readable run result: a versioned JSON body plus an optional CSV
/// time series. The content hash covers the body only, so identical
/// scenario + flags reproduce it bit for bit.
struct Report {
  nlohmann::ordered_json body;  // includes "schema": "riemoc-report/1"
  double timing_ms = 0.0;
  std::vector<std::string> csv_header;
  std::vector<std::vector<double>> csv_rows;

  std::string content_hash() const;
  /// body + timing + hash, for emission.
  nlohmann::ordered_json full() const;
};

void write_report_json(const Report& report, const std::string& path);
void write_report_csv(const Report& report, const std::string& path);

}  // namespace riemoc::cli
