#ifndef MIG_IO_HPP
#define MIG_IO_HPP

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mig/dataset.hpp"
#include "mig/errors.hpp"

namespace mig::io {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"' && field.find_first_not_of(" \t") == std::string::npos) {
      field.clear();
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted)
    throw Error(ErrorKind::input, "line " + std::to_string(line_no) + ", column " + std::to_string(out.size() + 1) +
                                      ": unterminated quoted field");
  out.push_back(std::move(field));
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Parses a decimal number; the whole field must be consumed. Returns false for
/// a missing marker (empty field or literal NA).
inline bool parse_cell(std::string_view raw, double& value, std::size_t line_no, std::size_t col_no) {
  const std::string_view s = trim(raw);
  if (s.empty() || s == "NA") return false;
  std::string_view body = s.front() == '+' ? s.substr(1) : s;
  const char* first = body.data();
  const char* last = body.data() + body.size();
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::general);
  if (ec != std::errc() || ptr != last || !std::isfinite(value) || body.empty())
    throw Error(ErrorKind::input, "line " + std::to_string(line_no) + ", column " + std::to_string(col_no) +
                                      ": not a decimal number: '" + std::string(s) + "'");
  return true;
}

/// Reads a numeric CSV with a header row. `response` names the outcome column;
/// every other column is a covariate. A response cell that is missing is a
/// data-contract violation.
inline Dataset read_csv(std::istream& in, const std::string& response) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_record(line, line_no);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorKind::input, "CSV is empty (a header row is required)");
  for (auto& h : header) h = std::string(trim(h));
  std::ptrdiff_t ycol = -1;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == response) {
      if (ycol >= 0) throw Error(ErrorKind::input, "response column '" + response + "' appears twice");
      ycol = static_cast<std::ptrdiff_t>(c);
    }
  if (ycol < 0) throw Error(ErrorKind::input, "response column '" + response + "' not found in header");
  if (header.size() < 2) throw Error(ErrorKind::input, "CSV needs at least one covariate column");

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (static_cast<std::ptrdiff_t>(c) != ycol) names.push_back(header[c]);

  std::vector<double> yv, xv;
  std::vector<std::uint8_t> mv;
  std::vector<std::size_t> missing_response_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no);
    if (fields.size() != header.size())
      throw Error(ErrorKind::input, "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                        " fields, found " + std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const bool present = parse_cell(fields[c], v, line_no, c + 1);
      if (static_cast<std::ptrdiff_t>(c) == ycol) {
        if (!present) missing_response_lines.push_back(line_no);
        yv.push_back(present ? v : std::numeric_limits<double>::quiet_NaN());
      } else {
        xv.push_back(present ? v : std::numeric_limits<double>::quiet_NaN());
        mv.push_back(present ? 0 : 1);
      }
    }
  }
  if (yv.empty()) throw Error(ErrorKind::input, "CSV has a header but no data rows");
  if (!missing_response_lines.empty())
    throw Error(ErrorKind::data_contract, "response '" + response + "' is missing on line " +
                                              std::to_string(missing_response_lines.front()) + " (" +
                                              std::to_string(missing_response_lines.size()) + " rows in total)");
  const auto n = static_cast<Index>(yv.size());
  const auto p = static_cast<Index>(names.size());
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(yv.data(), n);
  Eigen::MatrixXd x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xv.data(), n, p);
  MaskMatrix mask = Eigen::Map<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(mv.data(), n, p);
  return Dataset(std::move(y), std::move(x), std::move(mask), std::move(names), response);
}

inline Dataset read_csv_file(const std::string& path, const std::string& response) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input, "cannot open '" + path + "'");
  return read_csv(in, response);
}

/// Shortest text that reads back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

/// Fixed-precision text for reports; NaN prints as NA.
inline std::string format_fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

/// Writes the dataset with the response first; masked cells are empty.
inline void write_dataset_csv(std::ostream& out, const Dataset& ds) {
  out << ds.response_name();
  for (const auto& nm : ds.names()) out << ',' << nm;
  out << '\n';
  for (Index i = 0; i < ds.n(); ++i) {
    out << format_exact(ds.y()(i));
    for (Index j = 0; j < ds.p(); ++j) {
      out << ',';
      if (!ds.missing(i, j)) out << format_exact(ds.at(i, j));
    }
    out << '\n';
  }
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// A table of strings written either as CSV or as left/right aligned text.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write_csv(std::ostream& out) const {
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << csv_escape(r[c]);
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
  }

  /// First column left-aligned, the rest right-aligned.
  void write_text(std::ostream& out) const {
    std::vector<std::size_t> width(header.size(), 0);
    auto measure = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    };
    measure(header);
    for (const auto& r : rows) measure(r);
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) {
        const std::string pad(width[c] - r[c].size(), ' ');
        if (c) out << "  ";
        out << (c == 0 ? r[c] + pad : pad + r[c]);
      }
      out << '\n';
    };
    line(header);
    std::size_t total = 0;
    for (std::size_t w : width) total += w;
    out << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << '\n';
    for (const auto& r : rows) line(r);
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::input, "cannot write '" + path + "'");
  out << content;
}

}  // namespace mig::io

#endif  // MIG_IO_HPP
