#include "flat_toml.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fregan::toml {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool bare_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
}

// Parses a basic string starting at s[0] == '"'; returns the index after the closing quote.
std::size_t parse_string(const std::string& s, std::string& out, const std::string& where) {
    out.clear();
    std::size_t i = 1;
    while (i < s.size() && s[i] != '"') {
        char c = s[i++];
        if (c == '\\') {
            if (i >= s.size()) break;
            const char e = s[i++];
            switch (e) {
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                case '"': c = '"'; break;
                case '\\': c = '\\'; break;
                default: throw ParseError(where + ": unsupported escape \\" + std::string(1, e));
            }
        }
        out += c;
    }
    if (i >= s.size()) throw ParseError(where + ": unterminated string");
    return i + 1;
}

Value parse_value(const std::string& raw, const std::string& where) {
    if (raw.empty()) throw ParseError(where + ": missing value");
    if (raw[0] == '"') {
        std::string s;
        const std::size_t end = parse_string(raw, s, where);
        const std::string rest = trim(raw.substr(end));
        if (!rest.empty() && rest[0] != '#') throw ParseError(where + ": trailing characters after string");
        return s;
    }
    if (raw[0] == '[' || raw[0] == '{') throw ParseError(where + ": arrays and inline tables are not supported");
    std::string tok = raw;
    if (auto hash = tok.find('#'); hash != std::string::npos) tok = trim(tok.substr(0, hash));
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char c : tok)
        if (c != '_') digits += c;
    const bool floating = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    errno = 0;
    char* end = nullptr;
    if (floating) {
        const double d = std::strtod(digits.c_str(), &end);
        if (end && *end == '\0' && !digits.empty() && errno == 0) return d;
    } else {
        const long long v = std::strtoll(digits.c_str(), &end, 0);
        if (end && *end == '\0' && !digits.empty() && errno == 0) return v;
    }
    throw ParseError(where + ": cannot parse value '" + tok + "'");
}

}  // namespace

std::map<std::string, Value> parse(const std::string& text, const std::string& origin) {
    std::map<std::string, Value> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t[0] == '[') throw ParseError(where + ": tables are not supported (flat keys only)");
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        if (!bare_key(key)) throw ParseError(where + ": invalid key '" + key + "'");
        if (out.count(key)) throw ParseError(where + ": duplicate key '" + key + "'");
        out.emplace(key, parse_value(trim(t.substr(eq + 1)), where));
    }
    return out;
}

std::map<std::string, Value> parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string type_name(const Value& v) {
    switch (v.index()) {
        case 0: return "boolean";
        case 1: return "integer";
        case 2: return "float";
        default: return "string";
    }
}

}  // namespace fregan::toml
