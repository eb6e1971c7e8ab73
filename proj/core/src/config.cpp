#include "pipgan/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pipgan/errors.hpp"

namespace pipgan {
namespace {

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

std::string unquote(std::string value) {
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
        return value.substr(1, value.size() - 2);
    }
    return value;
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (!quoted && (line[i] == '#' || line[i] == ';')) return line.substr(0, i);
    }
    return line;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Config Config::parse(const std::string& text) {
    Config config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto content = trim(strip_comment(line));
        if (content.empty()) continue;
        if (content.front() == '[') {
            if (content.back() != ']') {
                throw InvalidArgument("config line " + std::to_string(line_no) + ": bad section header");
            }
            section = trim(content.substr(1, content.size() - 2));
            continue;
        }
        auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
        }
        auto key = trim(content.substr(0, eq));
        if (key.empty()) {
            throw InvalidArgument("config line " + std::to_string(line_no) + ": empty key");
        }
        if (!section.empty()) key = section + "." + key;
        config.entries_[key] = unquote(trim(content.substr(eq + 1)));
    }
    return config;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("config file not found: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [key, value] : entries_) {
        out += key;
        out += " = ";
        bool needs_quotes = value.empty() || value.find_first_of("#; \t") != std::string::npos;
        out += needs_quotes ? "\"" + value + "\"" : value;
        out += '\n';
    }
    return out;
}

void Config::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config: " + path.string());
    out << serialize();
}

std::string Config::hash() const { return fnv1a_hex(serialize()); }

bool Config::contains(const std::string& key) const { return entries_.count(key) > 0; }

void Config::set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

void Config::merge(const Config& other) {
    for (const auto& [key, value] : other.entries_) entries_[key] = value;
}

std::optional<std::string> Config::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
    auto value = get(key);
    if (!value) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(*value, &used);
        if (used != value->size()) throw std::invalid_argument(*value);
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument("config key '" + key + "' is not a number: " + *value);
    }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    auto value = get(key);
    if (!value) return fallback;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(value->data(), value->data() + value->size(), v);
    if (ec != std::errc() || ptr != value->data() + value->size()) {
        throw InvalidArgument("config key '" + key + "' is not an integer: " + *value);
    }
    return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto value = get(key);
    if (!value) return fallback;
    std::string v = *value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidArgument("config key '" + key + "' is not a boolean: " + *value);
}

std::vector<std::string> Config::get_list(const std::string& key) const {
    std::vector<std::string> items;
    auto value = get(key);
    if (!value) return items;
    std::string raw = *value;
    if (raw.size() >= 2 && raw.front() == '[' && raw.back() == ']') raw = raw.substr(1, raw.size() - 2);
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = unquote(trim(item));
        if (!t.empty()) items.push_back(t);
    }
    return items;
}

}  // namespace pipgan
