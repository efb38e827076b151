#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recflex {

// Tab-separated file with a header row.
struct TsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }
    int require_column(std::string_view name) const {
        int idx = column_index(name);
        if (idx < 0)
            throw std::runtime_error("missing required column: " + std::string(name));
        return idx;
    }
};

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline TsvTable read_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    TsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.columns = split_tabs(line);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != table.columns.size())
            throw std::runtime_error("row with " + std::to_string(fields.size()) +
                                     " fields, expected " +
                                     std::to_string(table.columns.size()) + " in " + path);
        table.rows.push_back(std::move(fields));
    }
    return table;
}

inline std::int64_t parse_int(std::string_view s, std::string_view what) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::runtime_error("non-integer " + std::string(what) + ": '" +
                                 std::string(s) + "'");
    return value;
}

inline double parse_double(std::string_view s, std::string_view what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(std::string(s), &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("non-numeric " + std::string(what) + ": '" +
                                 std::string(s) + "'");
    }
}

// Bracketed comma-separated integer list, e.g. "[5,9]" or "[]".
inline std::vector<std::int64_t> parse_int_list(std::string_view s) {
    if (s.size() < 2 || s.front() != '[' || s.back() != ']')
        throw std::runtime_error("malformed list: '" + std::string(s) + "'");
    std::vector<std::int64_t> out;
    std::string_view body = s.substr(1, s.size() - 2);
    if (body.empty()) return out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = body.find(',', start);
        std::string_view tok =
            pos == std::string_view::npos ? body.substr(start) : body.substr(start, pos - start);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        out.push_back(parse_int(tok, "list element"));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace recflex
