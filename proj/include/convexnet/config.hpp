#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "convexnet/common.hpp"

namespace convexnet {

/// Flat key-value run configuration with sections. Order-preserving so that
/// parse -> serialize -> parse is the identity; comments start with '#'.
struct Config {
    struct Entry {
        std::string section;
        std::string key;
        std::string value;
    };
    std::vector<Entry> entries;

    bool has(const std::string& section, const std::string& key) const {
        for (const Entry& e : entries)
            if (e.section == section && e.key == key) return true;
        return false;
    }

    const std::string& get(const std::string& section, const std::string& key) const {
        for (const Entry& e : entries)
            if (e.section == section && e.key == key) return e.value;
        throw config_error("missing config key [" + section + "] " + key);
    }

    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? get(section, key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        const std::string& raw = get(section, key);
        try {
            std::size_t used = 0;
            const double v = std::stod(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw config_error("key [" + section + "] " + key + ": not a number: '" + raw + "'");
        }
    }

    double get_double_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    std::int64_t get_int(const std::string& section, const std::string& key) const {
        const std::string& raw = get(section, key);
        try {
            std::size_t used = 0;
            const std::int64_t v = std::stoll(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw config_error("key [" + section + "] " + key + ": not an integer: '" + raw + "'");
        }
    }

    std::int64_t get_int_or(const std::string& section, const std::string& key,
                            std::int64_t fallback) const {
        return has(section, key) ? get_int(section, key) : fallback;
    }

    std::vector<double> get_doubles(const std::string& section, const std::string& key) const {
        const std::string& raw = get(section, key);
        std::vector<double> out;
        std::string token;
        std::stringstream ss(raw);
        while (std::getline(ss, token, ',')) {
            try {
                out.push_back(std::stod(token));
            } catch (const std::exception&) {
                throw config_error("key [" + section + "] " + key + ": bad list entry '" + token + "'");
            }
        }
        if (out.empty()) throw config_error("key [" + section + "] " + key + ": empty list");
        return out;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        for (Entry& e : entries)
            if (e.section == section && e.key == key) {
                e.value = value;
                return;
            }
        entries.push_back({section, key, value});
    }
};

namespace detail {
inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}
} // namespace detail

inline Config parse_config(std::istream& is) {
    Config cfg;
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string text = detail::trim(line.substr(0, line.find('#')));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']')
                throw config_error("line " + std::to_string(line_no) + ": unterminated section");
            section = detail::trim(text.substr(1, text.size() - 2));
            if (section.empty())
                throw config_error("line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(text.substr(0, eq));
        const std::string value = detail::trim(text.substr(eq + 1));
        if (key.empty())
            throw config_error("line " + std::to_string(line_no) + ": empty key");
        cfg.entries.push_back({section, key, value});
    }
    return cfg;
}

inline Config parse_config(const std::string& text) {
    std::stringstream ss(text);
    return parse_config(ss);
}

inline Config load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is.good()) throw config_error("cannot open config file: " + path);
    return parse_config(is);
}

inline std::string serialize_config(const Config& cfg) {
    std::string out;
    std::string section;
    bool first = true;
    for (const Config::Entry& e : cfg.entries) {
        if (first || e.section != section) {
            if (!first) out += "\n";
            out += "[" + e.section + "]\n";
            section = e.section;
            first = false;
        }
        out += e.key + " = " + e.value + "\n";
    }
    return out;
}

/// FNV-1a hash of the canonical serialization; stamped into run manifests.
inline std::uint64_t config_hash(const Config& cfg) {
    const std::string text = serialize_config(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (const char ch : text) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace convexnet
