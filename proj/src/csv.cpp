#include "mnarppca/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mnarppca {

std::string format_double(double v) {
  if (std::isnan(v)) return kNaToken;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> default_column_names(Index p) {
  std::vector<std::string> names;
  for (Index j = 0; j < p; ++j) names.push_back("V" + std::to_string(j + 1));
  return names;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  if (line.empty()) cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(ErrorKind::ParseError, source + ": empty file");
  for (auto& name : split_line(line)) header.push_back(trim(name));
  const std::size_t p = header.size();

  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::uint8_t>> mask;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != p) {
      throw Error(ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": expected " +
                                             std::to_string(p) + " fields, found " +
                                             std::to_string(cells.size()));
    }
    std::vector<double> row(p);
    std::vector<std::uint8_t> obs(p);
    for (std::size_t c = 0; c < p; ++c) {
      const std::string cell = trim(cells[c]);
      if (cell == kNaToken) {
        row[c] = missing_sentinel();
        obs[c] = 0;
        continue;
      }
      double v = 0.0;
      const char* begin = cell.data();
      const char* end = begin + cell.size();
      if (!cell.empty() && *begin == '+') ++begin;
      const auto res = std::from_chars(begin, end, v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
        throw Error(ErrorKind::ParseError, source + ":" + std::to_string(line_no) + ": column '" +
                                               header[c] + "': cannot parse '" + cell + "'");
      }
      row[c] = v;
      obs[c] = 1;
    }
    values.push_back(std::move(row));
    mask.push_back(std::move(obs));
  }
  if (values.empty()) throw Error(ErrorKind::ParseError, source + ": no data rows");

  Dataset data;
  const Index n = static_cast<Index>(values.size());
  data.y.resize(n, static_cast<Index>(p));
  data.omega.resize(n, static_cast<Index>(p));
  for (Index i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < p; ++c) {
      data.y(i, static_cast<Index>(c)) = values[static_cast<std::size_t>(i)][c];
      data.omega(i, static_cast<Index>(c)) = mask[static_cast<std::size_t>(i)][c];
    }
  }
  data.column_names = header;
  return data;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error(ErrorKind::InvalidArgument, "write to '" + path + "' failed");
}

Dataset load_csv(const std::string& path) { return parse_csv(read_file(path), path); }

std::string format_csv(const Matrix& y, const Mask& omega, const std::vector<std::string>& names) {
  const Index p = y.cols();
  const auto header = names.empty() ? default_column_names(p) : names;
  if (static_cast<Index>(header.size()) != p) {
    throw Error(ErrorKind::InvalidArgument, "column name count does not match data");
  }
  std::string out;
  for (Index j = 0; j < p; ++j) {
    if (j) out += ',';
    out += header[static_cast<std::size_t>(j)];
  }
  out += '\n';
  for (Index i = 0; i < y.rows(); ++i) {
    for (Index j = 0; j < p; ++j) {
      if (j) out += ',';
      out += (omega.size() && !omega(i, j)) ? std::string(kNaToken) : format_double(y(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string format_csv(const Matrix& y, const std::vector<std::string>& names) {
  return format_csv(y, Mask(), names);
}

void write_csv(const std::string& path, const Dataset& data) {
  write_file(path, format_csv(data.y, data.omega, data.column_names));
}

}  // namespace mnarppca
