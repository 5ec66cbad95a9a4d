#include "ionpulse/io/tabular.hpp"

#include "ionpulse/errors.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ionpulse::io {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double parse_number(const std::string& field, std::size_t line_no) {
  if (field == "nan") return std::nan("");
  if (field == "inf") return HUGE_VAL;
  if (field == "-inf") return -HUGE_VAL;
  const char* begin = field.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  const bool overflow = errno == ERANGE && std::abs(v) > 1.0;
  if (field.empty() || end != begin + field.size() || overflow)
    throw std::invalid_argument("line " + std::to_string(line_no) + ": not a number: '" + field +
                                "'");
  return v;
}

bool clean(const std::string& s) { return s.find_first_of("\t\n\r") == std::string::npos; }

}  // namespace

std::size_t TabularDataset::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::out_of_range("no column '" + name + "'");
}

bool TabularDataset::has_column(const std::string& name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

std::vector<double> TabularDataset::column_values(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.at(c));
  return out;
}

const std::string& TabularDataset::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  throw std::out_of_range("no metadata key '" + key + "'");
}

void TabularDataset::validate() const {
  if (header.empty()) throw std::invalid_argument("table has no columns");
  std::set<std::string> seen;
  for (const auto& h : header) {
    if (h.empty() || !clean(h) || h.front() == '#')
      throw std::invalid_argument("invalid column name '" + h + "'");
    if (!seen.insert(h).second) throw std::invalid_argument("duplicate column '" + h + "'");
  }
  for (const auto& [k, v] : metadata)
    if (k.empty() || !clean(k) || !clean(v) || k.find(": ") != std::string::npos)
      throw std::invalid_argument("invalid metadata entry '" + k + "'");
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() != header.size())
      throw std::invalid_argument("row " + std::to_string(i) + " has " +
                                  std::to_string(rows[i].size()) + " values, expected " +
                                  std::to_string(header.size()));
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string to_tsv(const TabularDataset& data) {
  data.validate();
  std::string out;
  for (const auto& [k, v] : data.metadata) out += "# " + k + ": " + v + "\n";
  for (std::size_t i = 0; i < data.header.size(); ++i)
    out += (i ? "\t" : "") + data.header[i];
  out += "\n";
  for (const auto& row : data.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += '\t';
      out += format_number(row[i]);
    }
    out += "\n";
  }
  return out;
}

TabularDataset parse_tsv(const std::string& text) {
  TabularDataset data;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (have_header) continue;
      const std::string body = line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
      const auto colon = body.find(": ");
      if (colon != std::string::npos)
        data.metadata.emplace_back(body.substr(0, colon), body.substr(colon + 2));
      continue;
    }
    const auto fields = split_tabs(line);
    if (!have_header) {
      data.header = fields;
      have_header = true;
      continue;
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, line_no));
    data.rows.push_back(std::move(row));
  }
  if (!have_header) throw std::invalid_argument("table has no header line");
  data.validate();
  return data;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

void write_tsv(const std::filesystem::path& path, const TabularDataset& data) {
  write_text_atomic(path, to_tsv(data));
}

TabularDataset read_tsv(const std::filesystem::path& path) { return parse_tsv(read_text(path)); }

}  // namespace ionpulse::io
