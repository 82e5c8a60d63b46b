#include "probcast/kvconfig.hpp"

#include <fstream>
#include <sstream>

#include "probcast/csv.hpp"
#include "probcast/errors.hpp"

namespace probcast {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        cfg.set(key, value);
    }
    return cfg;
}

KvConfig KvConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_string(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (" + path + ")");
    }
}

std::string KvConfig::to_string() const {
    std::string out;
    for (const auto& key : order_) {
        out += key;
        out += " = ";
        out += values_.at(key);
        out.push_back('\n');
    }
    return out;
}

void KvConfig::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write config '" + path + "'");
    out << to_string();
    if (!out) throw ConfigError("failed writing config '" + path + "'");
}

bool KvConfig::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& KvConfig::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

std::string KvConfig::get_string(const std::string& key) const { return raw(key); }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
}

double KvConfig::get_double(const std::string& key) const {
    return csv::parse_double(raw(key), "config key '" + key + "'");
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long long KvConfig::get_int(const std::string& key) const {
    return csv::parse_int(raw(key), "config key '" + key + "'");
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool KvConfig::get_bool(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
    const std::string& v = raw(key);
    std::vector<std::string> out;
    std::string cur;
    for (char ch : v) {
        if (ch == ';') {
            std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

std::vector<double> KvConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : get_list(key))
        out.push_back(csv::parse_double(item, "config key '" + key + "'"));
    return out;
}

void KvConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
}

void KvConfig::set_double(const std::string& key, double value) {
    set(key, csv::format_double(value));
}

void KvConfig::set_int(const std::string& key, long long value) {
    set(key, csv::format_int(value));
}

void KvConfig::set_bool(const std::string& key, bool value) { set(key, value ? "true" : "false"); }

}  // namespace probcast
