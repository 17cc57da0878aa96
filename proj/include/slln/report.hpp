#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/common.hpp"

namespace slln {

// Byte-stable tabular output: '.' decimal separator via fmt_double, LF line
// endings, header row first.  Cells containing a comma, quote, or newline are
// quoted RFC-4180 style.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) {
    if (header.empty()) throw std::invalid_argument("CsvWriter: header must not be empty");
    append_row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) {
      throw std::invalid_argument("CsvWriter: expected " + fmt_int(static_cast<std::int64_t>(width_)) +
                                  " cells, got " + fmt_int(static_cast<std::int64_t>(cells.size())));
    }
    append_row(cells);
  }

  const std::string& str() const { return out_; }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << out_;
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
  }

 private:
  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += escape(cells[i]);
    }
    out_ += '\n';
  }

  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      else q += c;
    }
    q += '"';
    return q;
  }

  std::size_t width_;
  std::string out_;
};

inline std::string cell(double x) { return fmt_double(x); }
inline std::string cell(std::int64_t x) { return fmt_int(x); }
inline std::string cell(int x) { return fmt_int(x); }
inline std::string cell(bool b) { return b ? "true" : "false"; }
inline std::string cell(const std::string& s) { return s; }
inline std::string cell(const char* s) { return s; }

// key = value summary block, in insertion order, LF endings.  Everything the
// CLI prints about a run funnels through one of these so that checksumming
// two runs compares their science, not incidental formatting.
class SummaryWriter {
 public:
  void kv(const std::string& key, const std::string& value) {
    out_ += key;
    out_ += " = ";
    out_ += value;
    out_ += '\n';
  }
  // Keeps string literals away from the bool overload.
  void kv(const std::string& key, const char* value) { kv(key, std::string(value)); }
  void kv(const std::string& key, double value) { kv(key, fmt_double(value)); }
  void kv(const std::string& key, std::int64_t value) { kv(key, fmt_int(value)); }
  void kv(const std::string& key, int value) { kv(key, fmt_int(value)); }
  void kv(const std::string& key, bool value) { kv(key, std::string(value ? "true" : "false")); }
  void kv(const std::string& key, std::uint64_t value) {
    kv(key, fmt_int(static_cast<std::int64_t>(value)));
  }
  void blank() { out_ += '\n'; }
  void line(const std::string& text) {
    out_ += text;
    out_ += '\n';
  }

  const std::string& str() const { return out_; }
  std::uint64_t checksum() const { return fnv1a64(out_); }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << out_;
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
  }

 private:
  std::string out_;
};

}  // namespace slln
