#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ssiv {

/// `key = value` documents with `#` comments. Lists are comma separated.
/// Keys never read by the caller can be reported with unused_keys().
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source_name = "<config>");
  static KeyValueConfig parse_file(const std::string& path);

  bool has(std::string_view key) const;
  std::string get_string(std::string_view key) const;
  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, std::optional<double> fallback = std::nullopt) const;
  std::int64_t get_int(std::string_view key, std::optional<std::int64_t> fallback = std::nullopt) const;
  std::uint64_t get_uint64(std::string_view key, std::optional<std::uint64_t> fallback = std::nullopt) const;
  bool get_bool(std::string_view key, std::optional<bool> fallback = std::nullopt) const;
  std::vector<std::string> get_list(std::string_view key) const;
  std::vector<double> get_double_list(std::string_view key) const;

  /// Throws ValidationError naming the first key that was never read.
  void reject_unused() const;
  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  const std::string& source() const noexcept { return source_; }

 private:
  const std::string* find(std::string_view key) const;
  [[noreturn]] void bad(std::string_view key, std::string_view what) const;

  std::string source_;
  std::map<std::string, std::string> entries_;
  std::map<std::string, std::size_t> lines_;
  mutable std::set<std::string> used_;
};

std::string trim(std::string_view s);

}  // namespace ssiv
