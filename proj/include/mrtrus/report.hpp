#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrtrus/stats.hpp"

namespace mrtrus {

/// Structured text report:
///
///   REPORT v1
///   kind: <kind>
///   <key>: <value>
///   table: <name>
///   <comma-separated header>
///   <comma-separated rows>
///   end
struct ReportTable {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  const std::vector<std::string>* row_where(std::string_view first_cell) const;
  std::size_t column(std::string_view name) const;  // throws InvalidInput when absent
};

struct Report {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<ReportTable> tables;

  void add(std::string key, std::string value) { fields.emplace_back(std::move(key), std::move(value)); }
  void add(std::string key, double value);
  ReportTable& table(std::string name, std::vector<std::string> header);

  const std::string* field(std::string_view key) const;
  double number(std::string_view key) const;  // throws InvalidInput
  const ReportTable* find_table(std::string_view name) const;
};

std::string encode_report(const Report& report);
Report decode_report(std::string_view text);

/// "method,mean,min,max,std" row.
std::vector<std::string> stats_row(std::string method, const SummaryStats& s);
inline std::vector<std::string> stats_header() { return {"method", "mean", "min", "max", "std"}; }

}  // namespace mrtrus
