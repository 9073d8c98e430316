#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace sephr {

// Flat dotted-key configuration: one `key = value` per line, `#` comments,
// lists as comma-separated values. Keys are kept sorted so rendering is
// canonical.
class KeyValues {
public:
    static KeyValues parse(const std::string& text);
    static KeyValues load(const std::string& path);

    std::string render() const;

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    void merge(const KeyValues& overrides);

    std::string str(const std::string& key, const std::string& fallback) const;
    std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    std::size_t size(const std::string& key, std::size_t fallback) const;
    double real(const std::string& key, double fallback) const;
    bool flag(const std::string& key, bool fallback) const;
    std::vector<std::size_t> sizes(const std::string& key, const std::vector<std::size_t>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    // Keys never read through an accessor, for unknown-key diagnostics.
    std::vector<std::string> unread() const;

private:
    const std::string* find(const std::string& key) const;

    std::map<std::string, std::string> entries_;
    mutable std::set<std::string> read_;
};

// Shortest text that parses back to the same double.
std::string format_real(double v);
std::string join_sizes(const std::vector<std::size_t>& values);

}  // namespace sephr
