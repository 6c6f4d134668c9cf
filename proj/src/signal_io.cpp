#include "increlab/signal_io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace increlab {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw CsvError("failed to format value");
  return std::string(buf, end);
}

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    if (first == std::string::npos) throw CsvError("empty cell on line " + std::to_string(line_no));
    const std::string trimmed = cell.substr(first, last - first + 1);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(trimmed, &used);
    } catch (const std::exception&) {
      throw CsvError("non-numeric cell '" + trimmed + "' on line " + std::to_string(line_no));
    }
    if (used != trimmed.size()) {
      throw CsvError("non-numeric cell '" + trimmed + "' on line " + std::to_string(line_no));
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

void write_csv(std::ostream& os, const Signal& s, const std::vector<std::string>& column_names,
               const std::vector<std::string>& comments) {
  if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != s.channels()) {
    throw CsvError("column name count does not match channel count");
  }
  for (const auto& c : comments) os << "# " << c << '\n';
  os << 't';
  for (Eigen::Index c = 0; c < s.channels(); ++c) {
    os << ',' << (column_names.empty() ? "ch" + std::to_string(c) : column_names[c]);
  }
  os << '\n';
  for (Eigen::Index k = 0; k < s.samples(); ++k) {
    os << format_double(s.time(k));
    for (Eigen::Index c = 0; c < s.channels(); ++c) os << ',' << format_double(s(k, c));
    os << '\n';
  }
}

Signal read_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t columns = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      if (cell != "t") throw CsvError("header must start with 't'");
      columns = 1;
      while (std::getline(ss, cell, ',')) ++columns;
      have_header = true;
      continue;
    }
    auto row = parse_row(line, line_no);
    if (row.size() != columns) {
      throw CsvError("line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                     " cells, expected " + std::to_string(columns));
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw CsvError("missing header row");
  if (rows.size() < 2) throw CsvError("need at least two samples to infer the step");
  if (rows.front()[0] != 0.0) throw CsvError("time column must start at 0");

  const double step = rows[1][0] - rows[0][0];
  if (!(step > 0)) throw CsvError("time column must be increasing");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double dt = rows[k][0] - rows[k - 1][0];
    if (std::abs(dt - step) > 1e-9 * step) {
      throw CsvError("non-uniform sampling at line with t=" + std::to_string(rows[k][0]));
    }
  }

  Signal::Matrix values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns - 1));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t c = 1; c < columns; ++c) values(k, c - 1) = rows[k][c];
  }
  try {
    return Signal(step, std::move(values));
  } catch (const std::invalid_argument& e) {
    throw CsvError(e.what());
  }
}

}  // namespace increlab
