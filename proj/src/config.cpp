#include "celltrack/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace celltrack {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

FlatConfig FlatConfig::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(0, "cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
}

FlatConfig FlatConfig::parse_text(const std::string& text, const std::string& origin) {
    FlatConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(lineno, origin + ":" + std::to_string(lineno) +
                                          ": expected key=value, got \"" + line + "\"");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || key.find_first_of(" \t") != std::string::npos) {
            throw ConfigError(lineno,
                              origin + ":" + std::to_string(lineno) + ": malformed key \"" + key + "\"");
        }
        cfg.values_[key] = {value, lineno};
    }
    return cfg;
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    touched_[key] = true;
    if (it == values_.end()) return fallback;
    const std::string& v = it->second.first;
    try {
        std::size_t pos = 0;
        const double parsed = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError(it->second.second, origin_ + ":" + std::to_string(it->second.second) +
                                                 ": key \"" + key + "\" is not a number: \"" + v + "\"");
    }
}

int FlatConfig::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    touched_[key] = true;
    if (it == values_.end()) return fallback;
    const std::string& v = it->second.first;
    int out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError(it->second.second, origin_ + ":" + std::to_string(it->second.second) +
                                                 ": key \"" + key + "\" is not an integer: \"" + v + "\"");
    }
    return out;
}

std::uint64_t FlatConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    touched_[key] = true;
    if (it == values_.end()) return fallback;
    const std::string& v = it->second.first;
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError(it->second.second,
                          origin_ + ":" + std::to_string(it->second.second) + ": key \"" + key +
                              "\" is not an unsigned integer: \"" + v + "\"");
    }
    return out;
}

bool FlatConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    touched_[key] = true;
    if (it == values_.end()) return fallback;
    std::string v = it->second.first;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(it->second.second, origin_ + ":" + std::to_string(it->second.second) +
                                             ": key \"" + key + "\" is not a boolean: \"" + v + "\"");
}

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    touched_[key] = true;
    if (it == values_.end()) return fallback;
    return it->second.first;
}

std::vector<std::string> FlatConfig::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [key, _] : values_) {
        if (!touched_.count(key)) out.push_back(key);
    }
    return out;
}

}  // namespace celltrack
