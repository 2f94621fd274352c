#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cii {

// ---------------------------------------------------------------------------
// CSV reading. Comma-separated, UTF-8, one header row, '#' lines ignored.
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        std::string_view field = comma == std::string_view::npos
                                     ? line.substr(start)
                                     : line.substr(start, comma - start);
        fields.emplace_back(trim(field));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw std::runtime_error("csv line " + std::to_string(line_no) +
                                 ": cannot parse number '" + std::string(s) + "'");
    return value;
}

}  // namespace detail

// Reads an entire numeric CSV. The header row is kept as text; every other
// non-empty, non-comment row must parse as doubles with the header's arity.
inline CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = detail::trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        auto fields = detail::split_csv_line(sv);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size())
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(table.header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(detail::parse_double(f, line_no));
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw std::runtime_error("csv stream: missing header row");
    return table;
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    try {
        return read_csv(in);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Output helpers.
// ---------------------------------------------------------------------------

// Decimal output with 12 significant digits (the exchange-format precision).
inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

// FNV-1a 64-bit, used to stamp outputs with a provenance hash of the config.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Writes via a temp file in the same directory plus an atomic rename, so a
// failed run never leaves a partial output behind.
template <typename WriteFn>
void atomic_write(const std::filesystem::path& path, WriteFn&& write_fn) {
    namespace fs = std::filesystem;
    fs::path dir = path.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        write_fn(out);
        out.flush();
        if (!out) {
            fs::remove(tmp);
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

}  // namespace cii
