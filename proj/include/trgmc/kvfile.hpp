#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace trgmc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parses a plain-text key=value file (UTF-8, '#' comments, blank lines
/// ignored). Later keys override earlier ones.
inline std::map<std::string, std::string> parse_kv_text(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        }
        out[key] = value;
    }
    return out;
}

inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_kv_text(in);
}

namespace detail {

inline double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                        double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for '" + key + "': " + it->second);
    }
}

inline int kv_int(const std::map<std::string, std::string>& kv, const std::string& key,
                  int fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for '" + key + "': " + it->second);
    }
}

inline uint64_t kv_u64(const std::map<std::string, std::string>& kv, const std::string& key,
                       uint64_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for '" + key + "': " + it->second);
    }
}

inline bool kv_bool(const std::map<std::string, std::string>& kv, const std::string& key,
                    bool fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean value for '" + key + "': " + it->second);
}

inline std::string kv_string(const std::map<std::string, std::string>& kv,
                             const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

}  // namespace detail

}  // namespace trgmc
