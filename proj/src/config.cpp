#include "ssiv/config.hpp"

#include <fstream>
#include <istream>

#include "ssiv/csv.hpp"
#include "ssiv/error.hpp"

namespace ssiv {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source_name) {
  KeyValueConfig cfg;
  cfg.source_ = source_name;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(source_name, n, "expected key = value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ParseError(source_name, n, "empty key");
    if (cfg.entries_.contains(key)) throw ParseError(source_name, n, "duplicate key '" + key + "'");
    cfg.lines_[key] = n;
    cfg.entries_.emplace(std::move(key), std::move(value));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return parse(in, path);
}

const std::string* KeyValueConfig::find(std::string_view key) const {
  auto it = entries_.find(std::string(key));
  if (it == entries_.end()) return nullptr;
  used_.insert(it->first);
  return &it->second;
}

bool KeyValueConfig::has(std::string_view key) const { return entries_.contains(std::string(key)); }

void KeyValueConfig::bad(std::string_view key, std::string_view what) const {
  const std::string k(key);
  const auto line = lines_.contains(k) ? lines_.at(k) : 0;
  throw ParseError(source_, line, "key '" + k + "': " + std::string(what));
}

std::string KeyValueConfig::get_string(std::string_view key) const {
  if (const auto* v = find(key)) return *v;
  throw ValidationError(source_ + ": missing required key '" + std::string(key) + "'");
}

std::string KeyValueConfig::get_string(std::string_view key, std::string fallback) const {
  if (const auto* v = find(key)) return *v;
  return fallback;
}

double KeyValueConfig::get_double(std::string_view key, std::optional<double> fallback) const {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ValidationError(source_ + ": missing required key '" + std::string(key) + "'");
  }
  auto d = csv::parse_real(*v);
  if (!d) bad(key, "not a number: '" + *v + "'");
  return *d;
}

std::int64_t KeyValueConfig::get_int(std::string_view key, std::optional<std::int64_t> fallback) const {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ValidationError(source_ + ": missing required key '" + std::string(key) + "'");
  }
  auto i = csv::parse_integer(*v);
  if (!i) bad(key, "not an integer: '" + *v + "'");
  return *i;
}

std::uint64_t KeyValueConfig::get_uint64(std::string_view key, std::optional<std::uint64_t> fallback) const {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ValidationError(source_ + ": missing required key '" + std::string(key) + "'");
  }
  try {
    std::size_t pos = 0;
    const auto u = std::stoull(*v, &pos, 0);
    if (pos != v->size() || v->front() == '-') bad(key, "not an unsigned integer: '" + *v + "'");
    return u;
  } catch (const std::logic_error&) {
    bad(key, "not an unsigned integer: '" + *v + "'");
  }
}

bool KeyValueConfig::get_bool(std::string_view key, std::optional<bool> fallback) const {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    throw ValidationError(source_ + ": missing required key '" + std::string(key) + "'");
  }
  if (*v == "true" || *v == "yes" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "0") return false;
  bad(key, "expected true/false, got '" + *v + "'");
}

std::vector<std::string> KeyValueConfig::get_list(std::string_view key) const {
  std::vector<std::string> out;
  const auto* v = find(key);
  if (!v || v->empty()) return out;
  std::string_view rest = *v;
  while (true) {
    const auto comma = rest.find(',');
    std::string item = trim(rest.substr(0, comma));
    if (item.empty()) bad(key, "empty list item");
    out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

std::vector<double> KeyValueConfig::get_double_list(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    auto d = csv::parse_real(item);
    if (!d) bad(key, "not a number: '" + item + "'");
    out.push_back(*d);
  }
  return out;
}

void KeyValueConfig::reject_unused() const {
  for (const auto& [k, v] : entries_) {
    if (!used_.contains(k)) throw ParseError(source_, lines_.at(k), "unknown key '" + k + "'");
  }
}

}  // namespace ssiv
