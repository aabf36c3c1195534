#pragma once

// Structured text configuration blocks.
//
// Format: one `key = value` pair per line; `#` starts a comment; blank lines
// are ignored; keys are case-sensitive. List values are comma separated:
//
//   model = ising
//   beta  = 1.2
//   depth_grid = 4, 5, 6, 7, 8
//
// The canonical serialization sorts keys and trims whitespace, so two blocks
// with the same content hash identically regardless of layout.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "treegibbs/errors.hpp"

namespace treegibbs {

namespace detail {

inline std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

class ConfigBlock {
 public:
  ConfigBlock() = default;

  static ConfigBlock parse(std::string_view text) {
    ConfigBlock block;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto content = detail::trim(line);
      if (content.empty()) continue;
      auto eq = content.find('=');
      if (eq == std::string::npos) {
        throw InvalidArgument("config line " + std::to_string(line_no) + ": expected `key = value`");
      }
      auto key = detail::trim(std::string_view(content).substr(0, eq));
      auto value = detail::trim(std::string_view(content).substr(eq + 1));
      if (key.empty()) throw InvalidArgument("config line " + std::to_string(line_no) + ": empty key");
      block.values_[key] = value;
    }
    return block;
  }

  static ConfigBlock load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
  }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void set(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    values_[key] = os.str();
  }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }
  void set(const std::string& key, const char* value) { values_[key] = value; }

  void merge(const ConfigBlock& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  std::optional<std::string> find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
    if (auto v = find(key)) return *v;
    if (fallback) return *fallback;
    throw InvalidArgument("missing config key: " + key);
  }

  double get_double(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    auto v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw InvalidArgument("missing config key: " + key);
    }
    return parse_double(key, *v);
  }

  long long get_int(const std::string& key, std::optional<long long> fallback = std::nullopt) const {
    auto v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw InvalidArgument("missing config key: " + key);
    }
    try {
      std::size_t used = 0;
      long long out = std::stoll(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      throw InvalidArgument("config key " + key + ": expected an integer, got `" + *v + "`");
    }
  }

  bool get_bool(const std::string& key, std::optional<bool> fallback = std::nullopt) const {
    auto v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw InvalidArgument("missing config key: " + key);
    }
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw InvalidArgument("config key " + key + ": expected a boolean, got `" + *v + "`");
  }

  std::vector<double> get_doubles(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) const {
    auto v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw InvalidArgument("missing config key: " + key);
    }
    std::vector<double> out;
    for (const auto& item : detail::split(*v, ',')) {
      if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
  }

  std::vector<int> get_ints(const std::string& key, std::optional<std::vector<int>> fallback = std::nullopt) const {
    auto v = find(key);
    if (!v) {
      if (fallback) return *fallback;
      throw InvalidArgument("missing config key: " + key);
    }
    std::vector<int> out;
    for (const auto& item : detail::split(*v, ',')) {
      if (item.empty()) continue;
      try {
        out.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw InvalidArgument("config key " + key + ": bad integer `" + item + "`");
      }
    }
    return out;
  }

  // Sorted `key = value` lines.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) {
      out += k;
      out += " = ";
      out += v;
      out += '\n';
    }
    return out;
  }

  // FNV-1a over the canonical serialization, rendered as 16 hex digits.
  std::string hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
      h >>= 4;
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static double parse_double(const std::string& key, const std::string& text) {
    try {
      std::size_t used = 0;
      double out = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument("trailing");
      return out;
    } catch (const std::exception&) {
      throw InvalidArgument("config key " + key + ": expected a number, got `" + text + "`");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace treegibbs
