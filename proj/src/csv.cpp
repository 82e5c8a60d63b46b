#include "probcast/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "probcast/errors.hpp"

namespace probcast::csv {

std::size_t Table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw DataError("missing column '" + name + "'");
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_int(long long v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& field, const std::string& context) {
    if (field == "nan") return std::nan("");
    if (field == "inf") return HUGE_VAL;
    if (field == "-inf") return -HUGE_VAL;
    double out = 0.0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw DataError("bad numeric field '" + field + "' in " + context);
    return out;
}

long long parse_int(const std::string& field, const std::string& context) {
    long long out = 0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw DataError("bad integer field '" + field + "' in " + context);
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

Table read_string(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = split_line(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != t.header.size())
                throw DataError("csv row " + std::to_string(lineno) + " has " +
                                std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(t.header.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    if (first) throw DataError("csv input is empty");
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return read_string(buf.str());
    } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + " (" + path + ")");
    }
}

std::string write_string(const Table& table) {
    std::string out;
    auto emit_row = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            out += row[i];
        }
        out.push_back('\n');
    };
    emit_row(table.header);
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw ContractError("csv row width mismatch on write");
        emit_row(row);
    }
    return out;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << write_string(table);
    if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace probcast::csv
