#pragma once

// Minimal RFC 4180 writer. Numbers go through std::to_chars, so output never
// depends on the global locale.

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace bmcond::io {

/// Shortest form with 9 significant digits; "nan"/"inf" spelled out.
inline std::string format_number(double v, int digits = 9) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

inline std::string quote_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out), width_(header.size()) {
    row_strings(header);
  }

  /// Starts a row; call field()/number()/blank() width times, then end_row().
  CsvWriter& field(std::string_view s) {
    sep();
    out_ << quote_field(s);
    return *this;
  }
  CsvWriter& number(double v) {
    sep();
    out_ << format_number(v);
    return *this;
  }
  CsvWriter& integer(long long v) {
    sep();
    out_ << v;
    return *this;
  }
  CsvWriter& blank() {
    sep();
    return *this;
  }
  void end_row() {
    out_ << "\r\n";
    column_ = 0;
  }

  [[nodiscard]] std::size_t width() const { return width_; }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (const auto& c : cells) field(c);
    end_row();
  }
  void sep() {
    if (column_++ > 0) out_ << ',';
  }

  std::ostream& out_;
  std::size_t width_;
  std::size_t column_ = 0;
};

}  // namespace bmcond::io
