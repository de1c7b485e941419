#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dmte/csv.hpp"  // trim / split_line

// Flat key=value run configs with [section] headers; '#' starts a comment.
// Parse order is preserved so re-serialization (and the config hash) is
// stable.

namespace dmte::cfg {

class Config {
public:
    static Config parse(std::istream& in, const std::string& source = "config") {
        Config out;
        out.source_ = source;
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = csv::trim(line);
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw std::runtime_error(source + ":" + std::to_string(line_no) +
                                             ": malformed section header");
                section = csv::trim(t.substr(1, t.size() - 2));
                continue;
            }
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(source + ":" + std::to_string(line_no) +
                                         ": expected key = value");
            const std::string key = csv::trim(t.substr(0, eq));
            const std::string value = csv::trim(t.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error(source + ":" + std::to_string(line_no) + ": empty key");
            out.entries_.emplace_back(section + "." + key, value);
        }
        return out;
    }

    bool has(const std::string& section, const std::string& key) const {
        return find(section + "." + key) != nullptr;
    }

    std::string get_string(const std::string& section, const std::string& key) const {
        const std::string* v = find(section + "." + key);
        if (!v) throw std::runtime_error(source_ + ": missing key " + section + "." + key);
        return *v;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        const std::string* v = find(section + "." + key);
        return v ? *v : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return to_double(get_string(section, key), section + "." + key);
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        const std::string* v = find(section + "." + key);
        return v ? to_double(*v, section + "." + key) : fallback;
    }

    std::int64_t get_int(const std::string& section, const std::string& key) const {
        return to_int(get_string(section, key), section + "." + key);
    }

    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const {
        const std::string* v = find(section + "." + key);
        return v ? to_int(*v, section + "." + key) : fallback;
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        const std::string* v = find(section + "." + key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw std::runtime_error(source_ + ": non-boolean value for " + section + "." + key);
    }

    std::vector<std::string> get_list(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        for (const auto& item : csv::split_line(get_string(section, key))) {
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : get_list(section, key))
            out.push_back(to_double(item, section + "." + key));
        return out;
    }

    // Canonical text form: entries in parse order as section.key = value.
    std::string serialize() const {
        std::ostringstream oss;
        for (const auto& [k, v] : entries_) oss << k << " = " << v << "\n";
        return oss.str();
    }

    // FNV-1a over the canonical form.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (char ch : serialize()) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
        return h;
    }

    const std::string& source() const { return source_; }

private:
    const std::string* find(const std::string& full_key) const {
        for (const auto& [k, v] : entries_) {
            if (k == full_key) return &v;
        }
        return nullptr;
    }

    double to_double(const std::string& s, const std::string& where) const {
        double v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw std::runtime_error(source_ + ": non-numeric value '" + s + "' for " + where);
        return v;
    }

    std::int64_t to_int(const std::string& s, const std::string& where) const {
        std::int64_t v{};
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
            throw std::runtime_error(source_ + ": non-integer value '" + s + "' for " + where);
        return v;
    }

    std::string source_ = "config";
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace dmte::cfg
