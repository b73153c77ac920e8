#pragma once

#include <map>
#include <string>
#include <vector>

namespace ecalab {

// Flat `[section]` / `key = value` config files: human-diffable, order
// preserving, '#' comments. Every run writes its fully resolved config next
// to its outputs so a run directory is self-contained.
class RunConfig {
public:
    RunConfig() = default;

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;  // throws if absent
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    int64_t get_int(const std::string& section, const std::string& key, int64_t fallback) const;
    uint64_t get_u64(const std::string& section, const std::string& key, uint64_t fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    void set_int(const std::string& section, const std::string& key, int64_t value);
    void set_u64(const std::string& section, const std::string& key, uint64_t value);
    void set_double(const std::string& section, const std::string& key, double value);

    std::string serialize() const;
    void write_file(const std::string& path) const;

private:
    struct Entry {
        std::string section, key, value;
    };
    std::vector<Entry> entries_;  // insertion order
    Entry* find(const std::string& section, const std::string& key);
    const Entry* find(const std::string& section, const std::string& key) const;
};

}  // namespace ecalab
