#include "mrtrus/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "mrtrus/error.hpp"
#include "mrtrus/io.hpp"

namespace mrtrus {

namespace {

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.emplace_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

}  // namespace

const std::vector<std::string>* ReportTable::row_where(std::string_view first_cell) const {
  for (const auto& r : rows)
    if (!r.empty() && r.front() == first_cell) return &r;
  return nullptr;
}

std::size_t ReportTable::column(std::string_view col) const {
  const auto it = std::find(header.begin(), header.end(), col);
  if (it == header.end()) throw Error(ErrorKind::InvalidInput, fmt::format("table {} has no column '{}'", name, col));
  return static_cast<std::size_t>(it - header.begin());
}

void Report::add(std::string key, double value) { add(std::move(key), format_real(value)); }

ReportTable& Report::table(std::string name, std::vector<std::string> header) {
  tables.push_back({std::move(name), std::move(header), {}});
  return tables.back();
}

const std::string* Report::field(std::string_view key) const {
  for (const auto& [k, v] : fields)
    if (k == key) return &v;
  return nullptr;
}

double Report::number(std::string_view key) const {
  const std::string* v = field(key);
  if (!v) throw Error(ErrorKind::InvalidInput, fmt::format("report has no field '{}'", key));
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size())
    throw Error(ErrorKind::InvalidInput, fmt::format("report field '{}' = '{}' is not numeric", key, *v));
  return out;
}

const ReportTable* Report::find_table(std::string_view name) const {
  for (const auto& t : tables)
    if (t.name == name) return &t;
  return nullptr;
}

std::string encode_report(const Report& report) {
  std::string out = "REPORT v1\n";
  out += fmt::format("kind: {}\n", report.kind);
  for (const auto& [k, v] : report.fields) out += fmt::format("{}: {}\n", k, v);
  for (const auto& t : report.tables) {
    out += fmt::format("table: {}\n{}\n", t.name, join_csv(t.header));
    for (const auto& r : t.rows) out += join_csv(r) + '\n';
    out += "end\n";
  }
  return out;
}

Report decode_report(std::string_view text) {
  LineReader reader(text);
  reader.expect_exact("REPORT v1");
  Report report;
  auto key_value = [&](std::string_view line) {
    const std::size_t colon = line.find(": ");
    if (colon == std::string_view::npos || colon == 0) reader.fail(fmt::format("expected '<key>: <value>', got '{}'", line));
    return std::pair{std::string(line.substr(0, colon)), std::string(line.substr(colon + 2))};
  };
  auto [kind_key, kind] = key_value(reader.raw_line("kind"));
  if (kind_key != "kind") reader.fail("first field must be 'kind'");
  report.kind = kind;
  while (!reader.at_end()) {
    auto [k, v] = key_value(reader.raw_line("field"));
    if (k != "table") {
      if (!report.tables.empty()) reader.fail("fields must precede tables");
      report.fields.emplace_back(std::move(k), std::move(v));
      continue;
    }
    ReportTable t;
    t.name = v;
    t.header = split_csv(reader.raw_line("table header"));
    while (true) {
      const std::string_view line = reader.raw_line("table row or 'end'");
      if (line == "end") break;
      auto row = split_csv(line);
      if (row.size() != t.header.size())
        reader.fail(fmt::format("table {}: row has {} cells, header has {}", t.name, row.size(), t.header.size()));
      t.rows.push_back(std::move(row));
    }
    report.tables.push_back(std::move(t));
  }
  return report;
}

std::vector<std::string> stats_row(std::string method, const SummaryStats& s) {
  return {std::move(method), format_real(s.mean), format_real(s.min), format_real(s.max), format_real(s.std)};
}

}  // namespace mrtrus
