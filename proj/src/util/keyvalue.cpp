#include "util/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tensor/error.hpp"

namespace sephr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    SEPHR_CHECK(ec == std::errc() && ptr == end, ErrorKind::config, "config key '", key, "' expects a number, got '",
                text, "'");
    return value;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        SEPHR_CHECK(eq != std::string::npos, ErrorKind::config, "config line ", lineno, " has no '=': ", line);
        const std::string key = trim(line.substr(0, eq));
        SEPHR_CHECK(!key.empty(), ErrorKind::config, "config line ", lineno, " has an empty key");
        kv.entries_[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    SEPHR_CHECK(in, ErrorKind::io, "cannot open config file '", path, "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str());
}

std::string KeyValues::render() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

void KeyValues::merge(const KeyValues& overrides) {
    for (const auto& [k, v] : overrides.entries_) entries_[k] = v;
}

const std::string* KeyValues::find(const std::string& key) const {
    read_.insert(key);
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

std::string KeyValues::str(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    return v ? *v : fallback;
}

std::int64_t KeyValues::integer(const std::string& key, std::int64_t fallback) const {
    const auto* v = find(key);
    return v ? parse_number<std::int64_t>(key, *v) : fallback;
}

std::size_t KeyValues::size(const std::string& key, std::size_t fallback) const {
    const auto* v = find(key);
    return v ? parse_number<std::size_t>(key, *v) : fallback;
}

double KeyValues::real(const std::string& key, double fallback) const {
    const auto* v = find(key);
    return v ? parse_number<double>(key, *v) : fallback;
}

bool KeyValues::flag(const std::string& key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
    detail::raise(ErrorKind::config, "config key '", key, "' expects true/false, got '", *v, "'");
}

std::vector<std::size_t> KeyValues::sizes(const std::string& key, const std::vector<std::size_t>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    std::istringstream is(*v);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
    SEPHR_CHECK(!out.empty(), ErrorKind::config, "config key '", key, "' expects a list");
    return out;
}

std::vector<std::string> KeyValues::unread() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : entries_)
        if (!read_.count(k)) out.push_back(k);
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace sephr
