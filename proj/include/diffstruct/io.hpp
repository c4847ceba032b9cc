#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace diffstruct {

class SampleSeries;
struct JetSeries;

/// Decimal text with 17 significant digits.
std::string format_number(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Writes a header row plus one row per index of the equally long columns.
void write_csv(std::ostream& out, std::span<const std::string> header,
               std::span<const std::vector<double>> columns);
void write_csv_file(const std::filesystem::path& path, std::span<const std::string> header,
                    std::span<const std::vector<double>> columns);

SampleSeries series_from_csv(const CsvTable& table);
JetSeries jets_from_csv(const CsvTable& table);

void write_series_csv(const std::filesystem::path& path, const SampleSeries& series);
void write_jets_csv(const std::filesystem::path& path, const JetSeries& jets);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace diffstruct
