#include "premia/panel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "premia/errors.hpp"

namespace premia {

std::string to_string(ZeroBetaMode mode) {
  switch (mode) {
    case ZeroBetaMode::imposed_zero: return "imposed_zero";
    case ZeroBetaMode::reference_differenced: return "reference_differenced";
    case ZeroBetaMode::intercept_estimated: return "intercept_estimated";
  }
  return "?";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Numeric order when both labels are plain numbers, lexicographic otherwise.
bool date_less(const std::string& a, const std::string& b) {
  if (all_digits(a) && all_digits(b)) {
    if (a.size() != b.size()) return a.size() < b.size();
  }
  return a < b;
}

const char* kind_name(PanelKind kind) {
  return kind == PanelKind::returns ? "returns" : "factors";
}

}  // namespace

RawPanel load_csv(const std::string& path, PanelKind kind) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError(std::string("cannot open ") + kind_name(kind) + " file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_csv_line(line);
  if (header.size() < 2)
    throw ValidationError(path + ": header must have a date column plus at least one series");

  RawPanel panel;
  for (std::size_t j = 1; j < header.size(); ++j) {
    auto name = trim(header[j]);
    if (name.empty())
      throw ValidationError(path + ": empty column name in header, column " + std::to_string(j + 1));
    panel.names.push_back(name);
  }
  const std::size_t ncols = panel.names.size();

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != ncols + 1)
      throw ValidationError(path + ": row " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(ncols + 1));
    const std::string date = trim(cells[0]);
    if (date.empty())
      throw ValidationError(path + ": row " + std::to_string(lineno) + " has an empty date label");
    if (!panel.dates.empty()) {
      const std::string& prev = panel.dates.back();
      if (date == prev)
        throw ValidationError(path + ": duplicate date '" + date + "' at row " +
                              std::to_string(lineno));
      if (!date_less(prev, date))
        throw ValidationError(path + ": dates not strictly increasing at row " +
                              std::to_string(lineno) + " ('" + prev + "' then '" + date + "')");
    }
    panel.dates.push_back(date);

    std::vector<double> row(ncols);
    for (std::size_t j = 0; j < ncols; ++j) {
      const std::string cell = trim(cells[j + 1]);
      if (cell.empty())
        throw ValidationError(path + ": blank cell at row " + std::to_string(lineno) +
                              ", column '" + panel.names[j] + "'");
      double v;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size())
        throw ValidationError(path + ": cannot parse '" + cell + "' at row " +
                              std::to_string(lineno) + ", column '" + panel.names[j] + "'");
      if (!std::isfinite(v))
        throw ValidationError(path + ": non-finite value at row " + std::to_string(lineno) +
                              ", column '" + panel.names[j] + "'");
      row[j] = v;
    }
    rows.push_back(std::move(row));
  }

  if (rows.size() < 2)
    throw ValidationError(path + ": need at least 2 observation rows, got " +
                          std::to_string(rows.size()));

  panel.values.resize(static_cast<long>(rows.size()), static_cast<long>(ncols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < ncols; ++j)
      panel.values(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
  return panel;
}

void write_csv(const RawPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "date";
  for (const auto& n : panel.names) out << ',' << n;
  out << '\n';
  for (long t = 0; t < panel.T(); ++t) {
    out << panel.dates[static_cast<std::size_t>(t)];
    for (long j = 0; j < panel.M(); ++j) out << ',' << panel.values(t, j);
    out << '\n';
  }
}

AlignedDataset align(const RawPanel& returns, const RawPanel& factors) {
  std::unordered_map<std::string, long> factor_row;
  for (long t = 0; t < factors.T(); ++t)
    factor_row.emplace(factors.dates[static_cast<std::size_t>(t)], t);

  std::vector<long> r_rows, f_rows;
  std::vector<std::string> dates;
  for (long t = 0; t < returns.T(); ++t) {
    const auto& d = returns.dates[static_cast<std::size_t>(t)];
    auto it = factor_row.find(d);
    if (it == factor_row.end()) continue;
    r_rows.push_back(t);
    f_rows.push_back(it->second);
    dates.push_back(d);
  }

  if (dates.empty()) {
    // Heuristic for the usual cause: panels at different frequencies have
    // differently shaped labels (digit/letter pattern).
    auto shape = [](const std::vector<std::string>& v) {
      std::string s = v.empty() ? "" : v.front();
      for (auto& c : s)
        if (std::isdigit(static_cast<unsigned char>(c))) c = '9';
      return s;
    };
    if (shape(returns.dates) != shape(factors.dates))
      throw ValidationError(
          "no common dates between returns and factors; date label formats differ "
          "(mixed frequencies?)");
    throw ValidationError("no common dates between returns and factors");
  }
  if (dates.size() < 2)
    throw ValidationError("fewer than 2 common dates between returns and factors");

  AlignedDataset ds;
  ds.dates = std::move(dates);
  ds.return_names = returns.names;
  ds.factor_names = factors.names;
  const long T = static_cast<long>(ds.dates.size());
  ds.returns.resize(T, returns.M());
  ds.factors.resize(T, factors.M());
  for (long i = 0; i < T; ++i) {
    ds.returns.row(i) = returns.values.row(r_rows[static_cast<std::size_t>(i)]);
    ds.factors.row(i) = factors.values.row(f_rows[static_cast<std::size_t>(i)]);
  }
  ds.zero_beta_mode = ZeroBetaMode::intercept_estimated;
  return ds;
}

AlignedDataset reference_difference(const AlignedDataset& ds, const std::string& reference) {
  long ref = -1;
  for (long j = 0; j < ds.N(); ++j)
    if (ds.return_names[static_cast<std::size_t>(j)] == reference) {
      ref = j;
      break;
    }
  if (ref < 0) throw ValidationError("unknown reference return column: " + reference);
  if (ds.N() < 2) throw ValidationError("reference differencing needs at least 2 return columns");

  AlignedDataset out = ds;
  const long n = ds.N() - 1;
  out.returns.resize(ds.T(), n);
  out.return_names.clear();
  long c = 0;
  for (long j = 0; j < ds.N(); ++j) {
    if (j == ref) continue;
    out.returns.col(c) = ds.returns.col(j) - ds.returns.col(ref);
    out.return_names.push_back(ds.return_names[static_cast<std::size_t>(j)]);
    ++c;
  }
  out.zero_beta_mode = ZeroBetaMode::reference_differenced;
  out.reference_asset = reference;
  return out;
}

AlignedDataset set_zero_beta_mode(const AlignedDataset& ds, ZeroBetaMode mode) {
  if (mode == ZeroBetaMode::reference_differenced)
    throw ValidationError(
        "reference_differenced is set by reference_difference, not set_zero_beta_mode");
  AlignedDataset out = ds;
  out.zero_beta_mode = mode;
  return out;
}

}  // namespace premia
