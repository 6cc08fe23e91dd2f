#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gloredi {

/// Malformed config text, unknown key, or a value of the wrong type.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Flat `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Duplicate keys and lines without '=' throw ConfigError.
std::vector<ConfigEntry> parse_config(std::string_view text);
std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path);

double parse_double(const ConfigEntry& e);
std::size_t parse_size(const ConfigEntry& e);
std::uint64_t parse_u64(const ConfigEntry& e);
/// true/false, 1/0, yes/no, on/off.
bool parse_bool(const ConfigEntry& e);

}  // namespace gloredi
