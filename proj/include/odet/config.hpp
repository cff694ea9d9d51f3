#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "odet/errors.hpp"

namespace odet {

/// Sectioned key=value configuration ("[section]" headers, '#' comments).
/// Lookups throw ConfigError with file/line diagnostics.
class Config {
public:
    static Config parse_string(const std::string& text, std::string origin = "<string>") {
        Config cfg;
        cfg.origin_ = std::move(origin);
        std::istringstream is(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            std::string t = trim(strip_comment(line));
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) +
                                      ": unterminated section header");
                section = trim(t.substr(1, t.size() - 2));
                if (section.empty())
                    throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) +
                                      ": empty section name");
                cfg.order_.push_back(section);
                cfg.data_[section]; // ensure section exists even if empty
                continue;
            }
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) +
                                  ": expected key = value, got '" + t + "'");
            std::string key = trim(t.substr(0, eq));
            std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) + ": empty key");
            if (section.empty())
                throw ConfigError(cfg.origin_ + ":" + std::to_string(lineno) +
                                  ": key '" + key + "' outside any section");
            cfg.data_[section][key] = {value, lineno};
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file '" + path + "'");
        std::stringstream ss;
        ss << is.rdbuf();
        return parse_string(ss.str(), path);
    }

    bool has_section(const std::string& s) const { return data_.count(s) != 0; }

    bool has(const std::string& s, const std::string& k) const {
        auto it = data_.find(s);
        return it != data_.end() && it->second.count(k) != 0;
    }

    std::string get(const std::string& s, const std::string& k) const {
        auto it = data_.find(s);
        if (it == data_.end())
            throw ConfigError(origin_ + ": missing section [" + s + "]");
        auto jt = it->second.find(k);
        if (jt == it->second.end())
            throw ConfigError(origin_ + ": missing key '" + k + "' in section [" + s + "]");
        return jt->second.value;
    }

    std::string get_or(const std::string& s, const std::string& k,
                       const std::string& dflt) const {
        return has(s, k) ? get(s, k) : dflt;
    }

    double get_double(const std::string& s, const std::string& k) const {
        return to_double(s, k, get(s, k));
    }

    double get_double_or(const std::string& s, const std::string& k, double dflt) const {
        return has(s, k) ? get_double(s, k) : dflt;
    }

    int get_int(const std::string& s, const std::string& k) const {
        return int(std::lround(to_double(s, k, get(s, k))));
    }

    int get_int_or(const std::string& s, const std::string& k, int dflt) const {
        return has(s, k) ? get_int(s, k) : dflt;
    }

    std::vector<std::string> keys(const std::string& s) const {
        std::vector<std::string> out;
        auto it = data_.find(s);
        if (it == data_.end()) return out;
        for (auto& [k, v] : it->second) out.push_back(k);
        return out;
    }

    const std::string& origin() const { return origin_; }

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::string origin_;
    std::map<std::string, std::map<std::string, Entry>> data_;
    std::vector<std::string> order_;

    double to_double(const std::string& s, const std::string& k, const std::string& v) const {
        try {
            size_t idx = 0;
            double d = std::stod(v, &idx);
            while (idx < v.size() && std::isspace(static_cast<unsigned char>(v[idx]))) ++idx;
            if (idx != v.size()) throw std::invalid_argument("trailing");
            return d;
        } catch (const std::exception&) {
            int line = data_.at(s).at(k).line;
            throw ConfigError(origin_ + ":" + std::to_string(line) + ": key '" + k +
                              "' is not a number ('" + v + "')");
        }
    }

    static std::string strip_comment(const std::string& s) {
        auto pos = s.find('#');
        return pos == std::string::npos ? s : s.substr(0, pos);
    }

    static std::string trim(const std::string& s) {
        size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }
};

} // namespace odet
