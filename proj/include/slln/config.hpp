#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "slln/common.hpp"

namespace slln {

// Flat sectioned key-value configuration.
//
//   # comment
//   [stable]
//   alpha = 1.5
//   thetas = 0.25, 0.5, 1, 2
//
// Keys are addressed as "section.key".  Values stay strings until a typed
// getter parses them, so unknown keys cost nothing and the canonical manifest
// can echo the configuration byte for byte: sorted "section.key = value"
// lines with single spaces, LF endings, overrides already folded in.  Two
// invocations with the same file and the same --set list therefore produce
// identical manifest bytes regardless of environment.
class Config {
 public:
  Config() = default;

  static Config from_string(std::string_view text, std::string source = "<string>") {
    Config c;
    c.source_ = std::move(source);
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t nl = text.find('\n', pos);
      std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      ++line_no;
      std::string_view t = trim(line);
      if (t.empty() || t.front() == '#' || t.front() == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']' || t.size() < 3) {
          throw std::runtime_error(c.source_ + ":" + fmt_int(static_cast<std::int64_t>(line_no)) +
                                   ": malformed section header '" + std::string(t) + "'");
        }
        section = std::string(trim(t.substr(1, t.size() - 2)));
        if (section.empty()) {
          throw std::runtime_error(c.source_ + ":" + fmt_int(static_cast<std::int64_t>(line_no)) +
                                   ": empty section name");
        }
        continue;
      }
      std::size_t eq = t.find('=');
      if (eq == std::string_view::npos) {
        throw std::runtime_error(c.source_ + ":" + fmt_int(static_cast<std::int64_t>(line_no)) +
                                 ": expected 'key = value', got '" + std::string(t) + "'");
      }
      std::string key(trim(t.substr(0, eq)));
      std::string value(trim(t.substr(eq + 1)));
      if (key.empty()) {
        throw std::runtime_error(c.source_ + ":" + fmt_int(static_cast<std::int64_t>(line_no)) +
                                 ": empty key");
      }
      c.values_[section.empty() ? key : section + "." + key] = value;
    }
    return c;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path);
  }

  // "section.key=value"; later overrides win, including over the file.
  void apply_override(std::string_view spec) {
    std::size_t eq = spec.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw std::runtime_error("override must have the form section.key=value, got '" + std::string(spec) +
                               "'");
    }
    std::string key(trim(spec.substr(0, eq)));
    std::string value(trim(spec.substr(eq + 1)));
    values_[key] = value;
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::vector<std::string> keys() const {
    std::vector<std::string> ks;
    for (const auto& [k, v] : values_) ks.push_back(k);
    return ks;  // std::map iterates sorted
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("missing required config key '" + key + "'");
    return it->second;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_int(key, it->second);
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double(key, it->second);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = lower(it->second);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw std::runtime_error("config key '" + key + "': expected a boolean, got '" + it->second + "'");
  }

  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (auto& piece : split_list(it->second)) out.push_back(parse_double(key, piece));
    return out;
  }

  std::vector<std::int64_t> get_ints(const std::string& key, std::vector<std::int64_t> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::int64_t> out;
    for (auto& piece : split_list(it->second)) out.push_back(parse_int(key, piece));
    return out;
  }

  // Canonical byte-stable echo of the effective configuration.
  std::string manifest() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      out += k;
      out += " = ";
      out += v;
      out += "\n";
    }
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  static std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  }

  static std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
      std::size_t comma = s.find(',', pos);
      std::string_view piece = s.substr(pos, comma == std::string_view::npos ? s.size() - pos : comma - pos);
      out.emplace_back(trim(piece));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    while (!out.empty() && out.back().empty()) out.pop_back();
    return out;
  }

  static std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t x = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
      throw std::runtime_error("config key '" + key + "': expected an integer, got '" + v + "'");
    }
    return x;
  }

  static double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw std::runtime_error("config key '" + key + "': expected a number, got '" + v + "'");
    }
  }

  std::string source_ = "<empty>";
  std::map<std::string, std::string> values_;
};

}  // namespace slln
