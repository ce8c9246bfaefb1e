/*
 * Copyright 2026 The bevloc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "bevloc/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bevloc {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + text + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      throw std::invalid_argument("config: non-finite value for " + key);
    }
  }
  return value;
}

}  // namespace

KeyValueConfig KeyValueConfig::Parse(std::istream& in, const std::string& source) {
  KeyValueConfig config;
  config.source_ = source;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string key = eq == std::string::npos ? "" : Trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    }
    if (config.Has(key)) {
      throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                  ": duplicate key " + key);
    }
    config.values_[key] = Trim(line.substr(eq + 1));
  }
  return config;
}

KeyValueConfig KeyValueConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return Parse(in, path);
}

void KeyValueConfig::Set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

const std::string* KeyValueConfig::Find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string KeyValueConfig::GetString(const std::string& key,
                                      const std::string& fallback) const {
  const std::string* v = Find(key);
  return v ? *v : fallback;
}

double KeyValueConfig::GetDouble(const std::string& key, double fallback) const {
  const std::string* v = Find(key);
  return v ? ParseNumber<double>(key, *v) : fallback;
}

int KeyValueConfig::GetInt(const std::string& key, int fallback) const {
  const std::string* v = Find(key);
  return v ? ParseNumber<int>(key, *v) : fallback;
}

std::uint64_t KeyValueConfig::GetUint64(const std::string& key,
                                        std::uint64_t fallback) const {
  const std::string* v = Find(key);
  return v ? ParseNumber<std::uint64_t>(key, *v) : fallback;
}

bool KeyValueConfig::GetBool(const std::string& key, bool fallback) const {
  const std::string* v = Find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + *v + "'");
}

std::vector<std::string> KeyValueConfig::UnusedKeys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) out.push_back(key);
  }
  return out;
}

}  // namespace bevloc
