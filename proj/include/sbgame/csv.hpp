#pragma once

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace sbgame {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return {buf, res.ptr};
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : file_(path, std::ios::binary), out_(file_) {
    if (!file_) throw std::runtime_error("cannot open " + path + " for writing");
  }
  explicit CsvWriter(std::ostream& os) : out_(os) {}

  CsvWriter& header(std::initializer_list<std::string_view> cols) {
    for (auto c : cols) field(c);
    return end_row();
  }

  CsvWriter& field(std::string_view s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  CsvWriter& field(const std::string& s) { return field(std::string_view(s)); }
  CsvWriter& field(const char* s) { return field(std::string_view(s)); }
  CsvWriter& field(double v) { return field(format_double(v)); }
  CsvWriter& field(long v) { return field(std::to_string(v)); }
  CsvWriter& field(int v) { return field(std::to_string(v)); }
  CsvWriter& field(bool v) { return field(v ? "true" : "false"); }

  CsvWriter& end_row() {
    out_ << '\n';
    first_ = true;
    return *this;
  }

 private:
  std::ofstream file_;
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace sbgame
