#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "malab/common.hpp"

namespace malab::tomlcfg {

/// Minimal TOML subset: [section] headers, key = value lines, # comments.
/// Values: numbers, booleans, quoted strings, arrays of numbers. Section
/// names prefix keys as "section.key". This covers the pipeline config
/// format; no general TOML library ships with the toolchain.
struct Value {
    enum class Kind { number, boolean, string, array } kind = Kind::number;
    double num = 0;
    bool flag = false;
    std::string str;
    std::vector<double> arr;
};

using Table = std::map<std::string, Value>;

namespace detail {

inline std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline Value parse_value(const std::string& raw, int line_no) {
    Value v;
    const std::string s = strip(raw);
    if (s.empty()) throw ParameterError("toml: empty value at line " + std::to_string(line_no));
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ParameterError("toml: unterminated string at line " + std::to_string(line_no));
        v.kind = Value::Kind::string;
        v.str = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = Value::Kind::boolean;
        v.flag = s == "true";
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']')
            throw ParameterError("toml: unterminated array at line " + std::to_string(line_no));
        v.kind = Value::Kind::array;
        std::stringstream ss(s.substr(1, s.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string it = strip(item);
            if (it.empty()) continue;
            std::size_t used = 0;
            v.arr.push_back(std::stod(it, &used));
            if (used != it.size())
                throw ParameterError("toml: bad array element at line " + std::to_string(line_no));
        }
        return v;
    }
    std::size_t used = 0;
    v.num = std::stod(s, &used);
    if (used != s.size())
        throw ParameterError("toml: bad value '" + s + "' at line " + std::to_string(line_no));
    return v;
}

}  // namespace detail

inline Table parse(const std::string& text) {
    Table table;
    std::stringstream ss(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::strip(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParameterError("toml: bad section at line " + std::to_string(line_no));
            section = detail::strip(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParameterError("toml: expected key = value at line " + std::to_string(line_no));
        std::string key = detail::strip(line.substr(0, eq));
        if (key.empty())
            throw ParameterError("toml: empty key at line " + std::to_string(line_no));
        if (!section.empty()) key = section + "." + key;
        table[key] = detail::parse_value(line.substr(eq + 1), line_no);
    }
    return table;
}

inline Table parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

inline double get_num(const Table& t, const std::string& key, double fallback) {
    const auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (it->second.kind != Value::Kind::number)
        throw ParameterError("toml: " + key + " must be a number");
    return it->second.num;
}

inline std::vector<double> get_arr(const Table& t, const std::string& key,
                                   std::vector<double> fallback) {
    const auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (it->second.kind != Value::Kind::array)
        throw ParameterError("toml: " + key + " must be an array");
    return it->second.arr;
}

inline bool get_bool(const Table& t, const std::string& key, bool fallback) {
    const auto it = t.find(key);
    if (it == t.end()) return fallback;
    if (it->second.kind != Value::Kind::boolean)
        throw ParameterError("toml: " + key + " must be a boolean");
    return it->second.flag;
}

}  // namespace malab::tomlcfg
