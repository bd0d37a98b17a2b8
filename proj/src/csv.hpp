#pragma once

// Minimal numeric CSV reader for the road and power-limit sidecars.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ecoroute/scenario.hpp"

namespace ecoroute::csv {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Reads a numeric table whose header must equal `header` exactly.
/// Blank lines and lines starting with '#' are skipped.
inline std::vector<std::vector<double>> read(
    const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cells = split(t);
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (!have_header) {
      if (cells != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw ParseError(where + ": expected header '" + want + "'");
      }
      have_header = true;
      continue;
    }
    if (cells.size() != header.size())
      throw ParseError(where + ": expected " + std::to_string(header.size()) +
                       " columns, got " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != c.size())
        throw ParseError(where + ": '" + c + "' is not a number");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError(path.string() + ": empty file");
  return rows;
}

}  // namespace ecoroute::csv
