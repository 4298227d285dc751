#ifndef CELLTRACK_CONFIG_HPP
#define CELLTRACK_CONFIG_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace celltrack {

/// Raised on unparseable or invalid configuration; line is 0 when the
/// problem is not tied to a specific line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& what) : std::runtime_error(what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Flat key=value configuration with '#' comments. Keys are single tokens;
/// values keep internal whitespace trimmed at both ends. Duplicate keys take
/// the last value.
class FlatConfig {
public:
    FlatConfig() = default;

    static FlatConfig parse_file(const std::string& path);
    static FlatConfig parse_text(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = {value, 0}; }

    /// Keys never read back by any get_* call; used to reject typos.
    std::vector<std::string> unused_keys() const;

    const std::map<std::string, std::pair<std::string, int>>& entries() const { return values_; }

private:
    // key -> (value, line number)
    std::map<std::string, std::pair<std::string, int>> values_;
    mutable std::map<std::string, bool> touched_;
    std::string origin_ = "<none>";
};

}  // namespace celltrack

#endif
