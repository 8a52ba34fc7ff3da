#include "riemoc/report.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "riemoc/errors.hpp"

namespace riemoc::cli {

namespace {

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

std::string Report::content_hash() const { return fnv1a_hex(body.dump()); }

nlohmann::ordered_json Report::full() const {
  nlohmann::ordered_json j = body;
  j["timing_ms"] = timing_ms;
  j["report_hash"] = content_hash();
  return j;
}

void write_report_json(const Report& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write report file: " + path);
  out << report.full().dump(2) << "\n";
}

void write_report_csv(const Report& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot write csv file: " + path);
  out << std::setprecision(17);
  for (std::size_t c = 0; c < report.csv_header.size(); ++c)
    out << report.csv_header[c] << (c + 1 == report.csv_header.size() ? "\n" : ",");
  for (const auto& row : report.csv_rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      out << row[c] << (c + 1 == row.size() ? "\n" : ",");
  }
}

}  // namespace riemoc::cli
