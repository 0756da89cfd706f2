#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mrsl::tools {

class TomlError : public std::runtime_error {
 public:
  TomlError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Parses the TOML subset used by config files into JSON: [tables] and
/// [dotted.tables], bare/quoted/dotted keys, basic and literal strings,
/// integers, floats (incl. inf/nan), booleans, arrays (may span lines),
/// inline tables and # comments. Dates and array-of-tables are rejected.
nlohmann::json parse_toml(std::string_view text);

/// Reads a JSON or TOML config file. `.toml` files are parsed as TOML and
/// `.json` files as JSON; other names try JSON first, then TOML.
nlohmann::json load_config_file(const std::filesystem::path& path);

}  // namespace mrsl::tools
