#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dypol/core/types.hpp"

namespace dypol::harness {

// Minimal TOML reader covering the subset the experiment configs use:
// [table.subtable] headers, key = value with strings, integers, floats,
// booleans and homogeneous arrays, plus # comments. Keys are exposed in
// dotted form ("env.base"). Full TOML (dates, inline tables, multiline
// strings) is out of scope.
class TomlTable {
 public:
  static TomlTable parse_file(const std::filesystem::path& path);
  static TomlTable parse_string(const std::string& text);

  bool has(const std::string& key) const;

  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  Vec get_double_array(const std::string& key) const;
  Vec get_double_array(const std::string& key, const Vec& fallback) const;
  std::vector<int> get_int_array(const std::string& key) const;
  std::vector<int> get_int_array(const std::string& key,
                                 const std::vector<int>& fallback) const;

  std::vector<std::string> keys() const;

 private:
  struct Value {
    enum class Kind { kString, kNumber, kBool, kArray } kind;
    std::string str;
    double num = 0.0;
    bool is_integer = false;
    bool boolean = false;
    std::vector<Value> array;
  };

  const Value& at(const std::string& key) const;

  std::map<std::string, Value> values_;
};

}  // namespace dypol::harness
