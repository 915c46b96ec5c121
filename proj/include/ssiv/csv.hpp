#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ssiv::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

/// Header-checked row reader that tracks 1-based line numbers.
class Reader {
 public:
  Reader(std::istream& in, std::string source_name);

  const std::vector<std::string>& header() const noexcept { return header_; }
  /// Throws ParseError unless the header is exactly `expected`.
  void require_header(const std::vector<std::string>& expected) const;

  /// Next non-blank record; throws ParseError on column-count mismatch.
  bool next(std::vector<std::string>& fields);

  std::size_t line() const noexcept { return line_; }
  const std::string& source() const noexcept { return source_; }

  [[noreturn]] void fail(const std::string& what) const;

  double real(const std::string& field, std::string_view column) const;
  std::int64_t integer(const std::string& field, std::string_view column) const;
  std::optional<double> optional_real(const std::string& field, std::string_view column) const;

 private:
  std::istream& in_;
  std::string source_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

std::optional<double> parse_real(std::string_view s);
std::optional<std::int64_t> parse_integer(std::string_view s);

}  // namespace ssiv::csv
