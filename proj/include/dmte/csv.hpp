#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal comma-separated reader/writer for the fixed schemas used here.
// Fields are plain (no quoting); surrounding whitespace is trimmed.

namespace dmte::csv {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_line(const std::string& line, char delim = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

// Shortest round-trip decimal rendering; keeps exports byte-stable.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {
        std::string header;
        if (!std::getline(in_, header))
            throw std::runtime_error(source_ + ": missing header row");
        columns_ = split_line(header);
        for (std::size_t i = 0; i < columns_.size(); ++i) index_[columns_[i]] = i;
        row_ = 1;
    }

    void require_columns(const std::vector<std::string>& names) const {
        for (const auto& name : names) {
            if (index_.find(name) == index_.end())
                throw std::runtime_error(source_ + ": missing required column '" + name + "'");
        }
    }

    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++row_;
            if (trim(line).empty()) continue;
            fields = split_line(line);
            if (fields.size() != columns_.size())
                throw std::runtime_error(source_ + ":" + std::to_string(row_) + ": expected " +
                                         std::to_string(columns_.size()) + " fields, got " +
                                         std::to_string(fields.size()));
            return true;
        }
        return false;
    }

    const std::string& field(const std::vector<std::string>& fields, const std::string& name) const {
        const auto it = index_.find(name);
        if (it == index_.end())
            throw std::runtime_error(source_ + ": unknown column '" + name + "'");
        return fields[it->second];
    }

    bool has_column(const std::string& name) const { return index_.count(name) > 0; }

    double double_field(const std::vector<std::string>& fields, const std::string& name) const {
        const std::string& s = field(fields, name);
        double v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw std::runtime_error("non-numeric value '" + s + "' in column '" + name + "'");
        return v;
    }

    std::int64_t int_field(const std::vector<std::string>& fields, const std::string& name) const {
        const std::string& s = field(fields, name);
        std::int64_t v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw std::runtime_error("non-integer value '" + s + "' in column '" + name + "'");
        return v;
    }

    int row_number() const { return row_; }
    const std::vector<std::string>& columns() const { return columns_; }

private:
    std::istream& in_;
    std::string source_;
    std::vector<std::string> columns_;
    std::map<std::string, std::size_t> index_;
    int row_ = 0;
};

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << fields[i];
    }
    out << '\n';
}

}  // namespace dmte::csv
