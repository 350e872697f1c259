#include "tdep/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <system_error>
#include <vector>

#include "tdep/error.hpp"

namespace tdep {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

double parse_field(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw DataError("csv line " + std::to_string(line_no) + ": bad number '" + std::string(field) +
                    "'");
  return v;
}

// Header must be x1..xr,y1..yq in order; returns (r, q).
std::pair<std::size_t, std::size_t> parse_header(const std::vector<std::string_view>& cols) {
  std::size_t r = 0, q = 0;
  for (std::string_view c : cols) {
    const char axis = c.empty() ? '?' : c.front();
    if (axis == 'x' && q == 0)
      ++r;
    else if (axis == 'y')
      ++q;
    else
      throw DataError("csv header: expected columns x1..xr,y1..yq, got '" + std::string(c) + "'");
    const std::string want = std::string(1, axis) + std::to_string(axis == 'x' ? r : q);
    if (c != want)
      throw DataError("csv header: expected column '" + want + "', got '" + std::string(c) + "'");
  }
  if (r == 0 || q == 0) throw DataError("csv header: need at least one x and one y column");
  return {r, q};
}

}  // namespace

JointDiscreteMeasure read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty input");
  std::vector<std::string_view> cols;
  const auto [r, q] = parse_header(split_csv(line, cols));
  std::vector<double> xs, ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    split_csv(line, cols);
    if (cols.size() != r + q)
      throw DataError("csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(r + q) + " fields, got " + std::to_string(cols.size()));
    for (std::size_t d = 0; d < r; ++d) xs.push_back(parse_field(cols[d], line_no));
    for (std::size_t d = 0; d < q; ++d) ys.push_back(parse_field(cols[r + d], line_no));
  }
  if (xs.empty()) throw DataError("csv: no data rows");
  return from_samples(std::move(xs), std::move(ys), r, q);
}

JointDiscreteMeasure read_samples_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  return read_samples_csv(in);
}

void write_samples_csv(std::ostream& out, const JointDiscreteMeasure& gamma) {
  for (std::size_t d = 1; d <= gamma.x_dim(); ++d) out << (d > 1 ? ",x" : "x") << d;
  for (std::size_t d = 1; d <= gamma.y_dim(); ++d) out << ",y" << d;
  out << '\n';
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double* x = gamma.x_point(i);
    const double* y = gamma.y_point(i);
    for (std::size_t d = 0; d < gamma.x_dim(); ++d) {
      if (d) out << ',';
      out << format_double(x[d]);
    }
    for (std::size_t d = 0; d < gamma.y_dim(); ++d) out << ',' << format_double(y[d]);
    out << '\n';
  }
}

void write_samples_csv_file(const std::string& path, const JointDiscreteMeasure& gamma) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  write_samples_csv(out, gamma);
  out.flush();
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw NumericError("format_double failed");
  return std::string(buf, ptr);
}

}  // namespace tdep
