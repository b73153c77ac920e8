#include "ecalab/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ecalab {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

RunConfig RunConfig::parse_string(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        cfg.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig::Entry* RunConfig::find(const std::string& section, const std::string& key) {
    for (Entry& e : entries_)
        if (e.section == section && e.key == key) return &e;
    return nullptr;
}

const RunConfig::Entry* RunConfig::find(const std::string& section, const std::string& key) const {
    for (const Entry& e : entries_)
        if (e.section == section && e.key == key) return &e;
    return nullptr;
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string RunConfig::get(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) throw std::runtime_error("config key [" + section + "] " + key + " is required");
    return e->value;
}

std::string RunConfig::get_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
}

int64_t RunConfig::get_int(const std::string& section, const std::string& key,
                           int64_t fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    try {
        return std::stoll(e->value);
    } catch (const std::exception&) {
        throw std::runtime_error("config key [" + section + "] " + key + " = '" + e->value +
                                 "' is not an integer");
    }
}

uint64_t RunConfig::get_u64(const std::string& section, const std::string& key,
                            uint64_t fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    try {
        return std::stoull(e->value);
    } catch (const std::exception&) {
        throw std::runtime_error("config key [" + section + "] " + key + " = '" + e->value +
                                 "' is not an unsigned integer");
    }
}

double RunConfig::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    try {
        return std::stod(e->value);
    } catch (const std::exception&) {
        throw std::runtime_error("config key [" + section + "] " + key + " = '" + e->value +
                                 "' is not a number");
    }
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
    if (Entry* e = find(section, key)) {
        e->value = value;
        return;
    }
    entries_.push_back(Entry{section, key, value});
}

void RunConfig::set_int(const std::string& section, const std::string& key, int64_t value) {
    set(section, key, std::to_string(value));
}

void RunConfig::set_u64(const std::string& section, const std::string& key, uint64_t value) {
    set(section, key, std::to_string(value));
}

void RunConfig::set_double(const std::string& section, const std::string& key, double value) {
    std::ostringstream os;
    os.precision(12);
    os << value;
    set(section, key, os.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    // group by section, first-seen order
    std::vector<std::string> sections;
    for (const Entry& e : entries_)
        if (std::find(sections.begin(), sections.end(), e.section) == sections.end())
            sections.push_back(e.section);
    for (const std::string& sec : sections) {
        if (!sec.empty()) os << '[' << sec << "]\n";
        for (const Entry& e : entries_)
            if (e.section == sec) os << e.key << " = " << e.value << '\n';
        os << '\n';
    }
    return os.str();
}

void RunConfig::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot write config");
    out << serialize();
    if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

}  // namespace ecalab
