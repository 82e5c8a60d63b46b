#pragma once

#include <string>
#include <vector>

namespace probcast::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(const std::string& name) const;  // throws DataError if absent
};

// Deterministic numeric formatting: shortest round-trip decimal for doubles,
// identical bytes for identical values on any platform.
std::string format_double(double v);
std::string format_int(long long v);

double parse_double(const std::string& field, const std::string& context);
long long parse_int(const std::string& field, const std::string& context);

Table read_file(const std::string& path);
Table read_string(const std::string& text);

void write_file(const std::string& path, const Table& table);
std::string write_string(const Table& table);

}  // namespace probcast::csv
