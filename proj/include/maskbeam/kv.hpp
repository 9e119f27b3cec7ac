// kv.hpp
// Line-oriented "key = value" text files used for scenario and pipeline
// configs. '#' starts a comment, keys may be dotted, values are scalars or
// comma-separated lists.

#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "maskbeam/common.hpp"

namespace maskbeam {

inline std::string kv_trim(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                        const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string trimmed = kv_trim(line);
        if (trimmed.empty()) continue;
        const std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw DataError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = kv_trim(trimmed.substr(0, eq));
        const std::string value = kv_trim(trimmed.substr(eq + 1));
        if (key.empty()) throw DataError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw DataError(origin + ": duplicate key '" + key + "'");
    }
    return kv;
}

inline double kv_to_double(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (kv_trim(value.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("invalid number for key '" + key + "': " + value);
}

inline std::uint64_t kv_to_u64(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (kv_trim(value.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("invalid integer for key '" + key + "': " + value);
}

inline bool kv_to_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "on" || value == "1") return true;
    if (value == "false" || value == "off" || value == "0") return false;
    throw DataError("invalid boolean for key '" + key + "': " + value);
}

inline std::vector<double> kv_to_doubles(const std::string& value, const std::string& key) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) out.push_back(kv_to_double(kv_trim(item), key));
    if (out.empty()) throw DataError("empty list for key '" + key + "'");
    return out;
}

}  // namespace maskbeam
