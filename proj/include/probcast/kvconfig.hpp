#pragma once

#include <map>
#include <string>
#include <vector>

namespace probcast {

// Flat key=value document with '#' comments. Keys keep insertion order on write.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse_string(const std::string& text);
    static KvConfig load(const std::string& path);
    void save(const std::string& path) const;
    std::string to_string() const;

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key) const;  // ';' separated
    std::vector<double> get_double_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, long long value);
    void set_bool(const std::string& key, bool value);

    const std::vector<std::string>& keys() const { return order_; }

private:
    const std::string& raw(const std::string& key) const;

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

}  // namespace probcast
