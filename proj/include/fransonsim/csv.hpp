// Copyright 2026 The fransonsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Plain CSV tables with `#`-prefixed metadata lines, and the fixed
// 9-significant-digit number format every output uses.

#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace fransonsim::csv {

/// %.9g with negative zero folded to zero.
inline std::string format9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x == 0.0 ? 0.0 : x);
  return buf;
}

struct Table {
  std::map<std::string, std::string> meta;  // from "# key=value" lines
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }

  bool has(std::string_view name) const { return index_of(name) >= 0; }

  std::vector<double> column(std::string_view name) const {
    const int idx = index_of(name);
    if (idx < 0) throw std::out_of_range("no column '" + std::string(name) + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[idx]);
    return out;
  }
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Reads a numeric CSV with a header row. Throws std::runtime_error on
/// ragged rows or non-numeric cells.
inline Table read(std::istream& in) {
  Table table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      std::string_view body = detail::trim(view.substr(1));
      const std::size_t eq = body.find('=');
      if (eq != std::string_view::npos)
        table.meta[std::string(detail::trim(body.substr(0, eq)))] = std::string(detail::trim(body.substr(eq + 1)));
      continue;
    }
    const auto cells = detail::split(view);
    if (!have_header) {
      for (auto c : cells) table.columns.emplace_back(detail::trim(c));
      have_header = true;
      continue;
    }
    if (cells.size() != table.columns.size())
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(table.columns.size()) + " cells");
    std::vector<double> row;
    row.reserve(cells.size());
    for (auto c : cells) {
      c = detail::trim(c);
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), x);
      if (ec != std::errc{} || ptr != c.data() + c.size())
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad number '" + std::string(c) + "'");
      row.push_back(x);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw std::runtime_error("empty CSV input");
  return table;
}

}  // namespace fransonsim::csv
