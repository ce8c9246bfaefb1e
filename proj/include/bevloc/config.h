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

#ifndef BEVLOC_CONFIG_H_
#define BEVLOC_CONFIG_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace bevloc {

// "key = value" text, one pair per line; '#' starts a comment, blank lines
// are ignored and a repeated key is an error. Typed getters throw
// std::invalid_argument when a value does not parse.
class KeyValueConfig {
 public:
  static KeyValueConfig Parse(std::istream& in, const std::string& source = "config");
  static KeyValueConfig Load(const std::string& path);

  bool Has(const std::string& key) const { return values_.count(key) != 0; }
  void Set(const std::string& key, const std::string& value);

  std::string GetString(const std::string& key, const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  int GetInt(const std::string& key, int fallback) const;
  std::uint64_t GetUint64(const std::string& key, std::uint64_t fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;

  // Keys present but never read, sorted.
  std::vector<std::string> UnusedKeys() const;

 private:
  const std::string* Find(const std::string& key) const;

  std::string source_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace bevloc

#endif  // BEVLOC_CONFIG_H_
