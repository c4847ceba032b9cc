#include "diffstruct/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "diffstruct/error.hpp"
#include "diffstruct/jets.hpp"

namespace diffstruct {

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t line_no) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw Error(Errc::parse, "line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return value;
}

}  // namespace

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(Errc::parse, "CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const std::size_t idx = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[idx]);
  return out;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(table.header.size()) + " fields");
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw Error(Errc::parse, "CSV is empty (header row is mandatory)");
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return read_csv(in);
}

void write_csv(std::ostream& out, std::span<const std::string> header,
               std::span<const std::vector<double>> columns) {
  if (header.size() != columns.size()) throw Error(Errc::shape, "CSV header/column mismatch");
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != n) throw Error(Errc::shape, "CSV columns differ in length");
  }
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      out << (j ? "," : "") << format_number(columns[j][i]);
    }
    out << '\n';
  }
}

void write_csv_file(const std::filesystem::path& path, std::span<const std::string> header,
                    std::span<const std::vector<double>> columns) {
  std::ostringstream out;
  write_csv(out, header, columns);
  write_text_file(path, out.str());
}

SampleSeries series_from_csv(const CsvTable& table) {
  return SampleSeries(table.column("t"), table.column("u"));
}

JetSeries jets_from_csv(const CsvTable& table) {
  JetSeries jets{table.column("t"), table.column("u"), table.column("u1"), table.column("u2")};
  jets.validate();
  return jets;
}

void write_series_csv(const std::filesystem::path& path, const SampleSeries& series) {
  const std::vector<std::string> header{"t", "u"};
  const std::vector<std::vector<double>> cols{{series.t().begin(), series.t().end()},
                                              {series.u().begin(), series.u().end()}};
  write_csv_file(path, header, cols);
}

void write_jets_csv(const std::filesystem::path& path, const JetSeries& jets) {
  const std::vector<std::string> header{"t", "u", "u1", "u2"};
  const std::vector<std::vector<double>> cols{jets.t, jets.u, jets.u1, jets.u2};
  write_csv_file(path, header, cols);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

}  // namespace diffstruct
