#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pipgan {

/// Flat key=value configuration.
///
/// Accepts TOML/INI-style files: `key = value` lines, `#` or `;` comments,
/// optional `[section]` headers that prefix subsequent keys with `section.`,
/// and optional double quotes around values. Keys are kept in sorted order so
/// that serialization (and therefore the config hash) is canonical.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    void save(const std::filesystem::path& path) const;
    std::string serialize() const;

    /// FNV-1a 64 of the canonical serialization, as 16 hex digits.
    std::string hash() const;

    bool contains(const std::string& key) const;
    void set(const std::string& key, std::string value);
    /// Copies every key of `other` into this config, overwriting on conflict.
    void merge(const Config& other);

    std::optional<std::string> get(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated list.
    std::vector<std::string> get_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

std::string fnv1a_hex(const std::string& bytes);

}  // namespace pipgan
