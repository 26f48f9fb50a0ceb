#pragma once
// Reader for flat TOML files: `key = value` lines with strings, integers,
// floats and booleans. Tables and arrays are rejected.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>

namespace fregan::toml {

using Value = std::variant<bool, long long, double, std::string>;

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Keys keep their spelling; duplicates are an error.
std::map<std::string, Value> parse(const std::string& text, const std::string& origin = "config");
std::map<std::string, Value> parse_file(const std::filesystem::path& path);

std::string type_name(const Value& v);

}  // namespace fregan::toml
