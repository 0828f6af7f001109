#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctsynth/error.hpp"

namespace ctsynth {

// Flat key=value configuration with [section] headers. Keys are addressed as
// "section.key". '#' and ';' start comments.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Throws ParamError naming the key when it is absent.
  const std::string& require(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  double require_double(const std::string& key) const;
  int require_int(const std::string& key) const;

  std::vector<std::string> keys() const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;

  double as_double(const std::string& key, const std::string& raw) const;
  std::int64_t as_int(const std::string& key, const std::string& raw) const;
};

}  // namespace ctsynth
