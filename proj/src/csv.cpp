#include "ssiv/csv.hpp"

#include <charconv>
#include <cmath>

#include "ssiv/error.hpp"

namespace ssiv::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.emplace_back(trim(field));
  return out;
}

std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

Reader::Reader(std::istream& in, std::string source_name) : in_(in), source_(std::move(source_name)) {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    if (line_ == 1 && raw.size() >= 3 && raw.compare(0, 3, "\xEF\xBB\xBF") == 0) raw.erase(0, 3);
    if (trim(raw).empty()) continue;
    header_ = split_line(raw);
    return;
  }
  throw ParseError(source_, line_, "missing header row");
}

void Reader::require_header(const std::vector<std::string>& expected) const {
  if (header_ != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ParseError(source_, 1, "unexpected header; expected " + want);
  }
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    if (trim(raw).empty()) continue;
    fields = split_line(raw);
    if (fields.size() != header_.size()) {
      fail("expected " + std::to_string(header_.size()) + " fields, found " +
           std::to_string(fields.size()));
    }
    return true;
  }
  return false;
}

void Reader::fail(const std::string& what) const { throw ParseError(source_, line_, what); }

double Reader::real(const std::string& field, std::string_view column) const {
  auto v = parse_real(field);
  if (!v || !std::isfinite(*v)) fail("column '" + std::string(column) + "': not a number: '" + field + "'");
  return *v;
}

std::int64_t Reader::integer(const std::string& field, std::string_view column) const {
  auto v = parse_integer(field);
  if (!v) fail("column '" + std::string(column) + "': not an integer: '" + field + "'");
  return *v;
}

std::optional<double> Reader::optional_real(const std::string& field, std::string_view column) const {
  if (trim(field).empty()) return std::nullopt;
  return real(field, column);
}

}  // namespace ssiv::csv
