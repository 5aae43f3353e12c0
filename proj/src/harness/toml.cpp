#include "dypol/harness/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dypol::harness {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// strips a trailing comment that is not inside a string
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

}  // namespace

TomlTable TomlTable::parse_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_string(ss.str());
}

TomlTable TomlTable::parse_string(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string prefix;
  int line_no = 0;

  auto fail = [&](const std::string& msg) {
    throw std::runtime_error("toml: line " + std::to_string(line_no) + ": " + msg);
  };

  auto parse_scalar = [&](const std::string& tok) {
    Value v{};
    if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
      v.kind = Value::Kind::kString;
      v.str = tok.substr(1, tok.size() - 2);
    } else if (tok == "true" || tok == "false") {
      v.kind = Value::Kind::kBool;
      v.boolean = tok == "true";
    } else {
      v.kind = Value::Kind::kNumber;
      std::size_t used = 0;
      try {
        v.num = std::stod(tok, &used);
      } catch (const std::exception&) {
        fail("cannot parse value '" + tok + "'");
      }
      if (used != tok.size()) fail("trailing junk in value '" + tok + "'");
      v.is_integer = tok.find_first_of(".eE") == std::string::npos;
    }
    return v;
  };

  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated table header");
      prefix = trim(line.substr(1, line.size() - 2));
      if (prefix.empty()) fail("empty table name");
      continue;
    }

    std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string rhs = trim(line.substr(eq + 1));
    if (key.empty() || rhs.empty()) fail("empty key or value");
    if (!prefix.empty()) key = prefix + "." + key;

    Value v{};
    if (rhs.front() == '[') {
      if (rhs.back() != ']') fail("unterminated array");
      v.kind = Value::Kind::kArray;
      std::string body = rhs.substr(1, rhs.size() - 2);
      std::string tok;
      bool in_str = false;
      auto flush = [&] {
        tok = trim(tok);
        if (!tok.empty()) v.array.push_back(parse_scalar(tok));
        tok.clear();
      };
      for (char c : body) {
        if (c == '"') in_str = !in_str;
        if (c == ',' && !in_str) {
          flush();
        } else {
          tok.push_back(c);
        }
      }
      flush();
    } else {
      v = parse_scalar(rhs);
    }
    table.values_[key] = std::move(v);
  }
  return table;
}

bool TomlTable::has(const std::string& key) const { return values_.count(key) > 0; }

const TomlTable::Value& TomlTable::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::runtime_error("config: missing key '" + key + "'");
  }
  return it->second;
}

double TomlTable::get_double(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::kNumber) {
    throw std::runtime_error("config: '" + key + "' is not a number");
  }
  return v.num;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long TomlTable::get_int(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::kNumber || !v.is_integer) {
    throw std::runtime_error("config: '" + key + "' is not an integer");
  }
  return static_cast<long long>(v.num);
}

long long TomlTable::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool TomlTable::get_bool(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::kBool) {
    throw std::runtime_error("config: '" + key + "' is not a boolean");
  }
  return v.boolean;
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::string TomlTable::get_string(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::kString) {
    throw std::runtime_error("config: '" + key + "' is not a string");
  }
  return v.str;
}

std::string TomlTable::get_string(const std::string& key,
                                  const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

Vec TomlTable::get_double_array(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::kArray) {
    throw std::runtime_error("config: '" + key + "' is not an array");
  }
  Vec out;
  for (const Value& e : v.array) {
    if (e.kind != Value::Kind::kNumber) {
      throw std::runtime_error("config: '" + key + "' has non-numeric entries");
    }
    out.push_back(e.num);
  }
  return out;
}

Vec TomlTable::get_double_array(const std::string& key, const Vec& fallback) const {
  return has(key) ? get_double_array(key) : fallback;
}

std::vector<int> TomlTable::get_int_array(const std::string& key) const {
  Vec d = get_double_array(key);
  std::vector<int> out;
  out.reserve(d.size());
  for (double x : d) out.push_back(static_cast<int>(x));
  return out;
}

std::vector<int> TomlTable::get_int_array(const std::string& key,
                                          const std::vector<int>& fallback) const {
  return has(key) ? get_int_array(key) : fallback;
}

std::vector<std::string> TomlTable::keys() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [k, _] : values_) out.push_back(k);
  return out;
}

}  // namespace dypol::harness
