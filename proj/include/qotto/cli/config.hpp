// config.hpp: key = value run configuration with command-line overrides.
//
//   # comment
//   temperatures = 1, 50, 100
//   tau_min = 5          # trailing comments are allowed
//
// Keys are case-sensitive. Later sources (command-line flags) replace earlier
// ones (the file); a key repeated inside one file is an error.
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qotto::cli {

class config_error : public std::runtime_error {
 public:
  config_error(const std::string& where, const std::string& field, const std::string& what)
      : std::runtime_error(where + (field.empty() ? "" : ": field '" + field + "'") + ": " + what),
        location(where),
        field_name(field) {}
  std::string location;
  std::string field_name;
};

namespace detail {
inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace detail

class Config {
 public:
  struct Entry {
    std::string value;
    std::string origin;  // "file.cfg:12" or "--seed"
  };

  static Config parse(std::istream& in, const std::string& source) {
    Config c;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
      std::string_view view = line;
      if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
      view = detail::trim(view);
      if (view.empty()) continue;
      const std::string where = source + ":" + std::to_string(number);
      const auto eq = view.find('=');
      if (eq == std::string_view::npos) throw config_error(where, "", "expected 'key = value'");
      const std::string key(detail::trim(view.substr(0, eq)));
      const std::string value(detail::trim(view.substr(eq + 1)));
      if (key.empty()) throw config_error(where, "", "empty key");
      if (c.entries_.count(key)) {
        throw config_error(where, key, "repeated (first set at " + c.entries_[key].origin + ")");
      }
      c.entries_[key] = {value, where};
    }
    return c;
  }

  static Config parse_string(const std::string& text, const std::string& source = "<string>") {
    std::istringstream in(text);
    return parse(in, source);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path, "", "cannot open config file");
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value, const std::string& origin) {
    if (key.empty()) throw config_error(origin, "", "empty key");
    entries_[key] = {value, origin};
  }

  // "key=value" as given to --set.
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw config_error("--set " + assignment, "", "expected key=value");
    const std::string key(detail::trim(std::string_view(assignment).substr(0, eq)));
    set(key, std::string(detail::trim(std::string_view(assignment).substr(eq + 1))), "--set " + key);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  // Rejects keys outside the allowed set so typos do not pass silently.
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, entry] : entries_)
      if (!allowed.count(key)) throw config_error(entry.origin, key, "unknown key for this command");
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second.value;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_double(it->second.value, key, it->second.origin);
  }

  std::optional<double> find_double(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return to_double(it->second.value, key, it->second.origin);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_u64(it->second.value, key, it->second.origin);
  }

  std::optional<std::uint64_t> find_u64(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return to_u64(it->second.value, key, it->second.origin);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second.value;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error(it->second.origin, key, "expected a boolean, got '" + v + "'");
  }

  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<double> out;
    std::string_view rest = it->second.value;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view item = detail::trim(rest.substr(0, comma));
      out.push_back(to_double(std::string(item), key, it->second.origin));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

  std::string origin(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? "<default>" : it->second.origin;
  }

 private:
  static double to_double(const std::string& text, const std::string& key, const std::string& origin) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) {
      throw config_error(origin, key, "expected a number, got '" + text + "'");
    }
    return v;
  }

  static std::uint64_t to_u64(const std::string& text, const std::string& key, const std::string& origin) {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) {
      throw config_error(origin, key, "expected a non-negative integer, got '" + text + "'");
    }
    return v;
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace qotto::cli
