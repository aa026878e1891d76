// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Parsing helpers for key=value config text.

#pragma once

#include <charconv>
#include <cstdint>
#include <sstream>
#include <string>

#include "sgn/common/error.h"

namespace sgn {

inline std::string Trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Int = std::size_t>
Int ParseUnsigned(const std::string &key, const std::string &v) {
  Int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw DomainError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline double ParseDouble(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception &) {
  }
  throw DomainError("config key '" + key + "' expects a number, got '" + v + "'");
}

inline bool ParseBool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw DomainError("config key '" + key + "' expects true/false, got '" + v + "'");
}

// Calls set(key, value) for every non-blank, non-comment line.
template <typename Setter>
void ForEachKeyValue(const std::string &text, Setter &&set) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DomainError("config line without '=': '" + line + "'");
    set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
}

}  // namespace sgn
