#pragma once

// Tab-separated numeric tables with a `# key: value` metadata block:
//
//   # seed: 7
//   # config_hash: 0123456789abcdef
//   detuning_rad_per_ns<TAB>n<TAB>p_d
//   -3.9269908169872414<TAB>500<TAB>0.12
//
// Numbers are written with 17 significant digits so that reading a table
// back reproduces every value bit for bit.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ionpulse::io {

struct TabularDataset {
  std::vector<std::pair<std::string, std::string>> metadata;  // in file order
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Throws std::out_of_range for unknown columns and metadata keys.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
  const std::string& meta(const std::string& key) const;

  // Rectangular, non-empty header, unique column names and no tabs or
  // newlines in names or metadata. Throws std::invalid_argument.
  void validate() const;
};

std::string format_number(double value);

std::string to_tsv(const TabularDataset& data);
TabularDataset parse_tsv(const std::string& text);  // std::invalid_argument on bad input

// Atomic: writes `path`.tmp and renames it over `path`. Throws ionpulse::IoError.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_tsv(const std::filesystem::path& path, const TabularDataset& data);
TabularDataset read_tsv(const std::filesystem::path& path);

}  // namespace ionpulse::io
