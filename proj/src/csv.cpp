#include "prices/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "prices/error.hpp"

namespace prices::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.emplace_back(trim(cur));
    return out;
}

}  // namespace

std::optional<std::size_t> Table::find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

std::size_t Table::require(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw DataError("data-model", source + ": missing column '" + std::string(name) + "'");
}

double Table::number(std::size_t row, std::size_t col) const {
    const std::string& cell = rows.at(row).at(col);
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw DataError("data-model", source + ": line " + std::to_string(row + 2) + ", column '" +
                                          header.at(col) + "': non-numeric value '" + cell + "'");
    }
    return v;
}

Table parse(std::string_view text, std::string source) {
    Table t;
    t.source = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }
        auto fields = split_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
        } else {
            if (fields.size() != t.header.size()) {
                throw DataError("data-model", t.source + ": line " + std::to_string(line_no) + " has " +
                                                  std::to_string(fields.size()) + " fields, header has " +
                                                  std::to_string(t.header.size()));
            }
            t.rows.push_back(std::move(fields));
        }
        if (end == text.size()) break;
    }
    if (t.header.empty()) throw DataError("data-model", t.source + ": empty file");
    return t;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("data-model", "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void require_unique_header(const Table& t) {
    std::set<std::string> seen;
    for (const auto& h : t.header)
        if (!seen.insert(h).second)
            throw DataError("data-model", t.source + ": duplicate column '" + h + "'");
}

std::string format_exact(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string format_money(double v) {
    if (!std::isfinite(v)) return format_exact(v);
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
    std::string s(buf, ptr);
    return s == "-0.000000" ? "0.000000" : s;
}

std::string format_index(double v) {
    if (!std::isfinite(v)) return format_exact(v);
    if (v == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
    return std::string(buf, ptr);
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

Writer::Writer(std::vector<std::string> header) : header_(std::move(header)) {}

void Writer::add_row(std::vector<std::string> row) {
    if (row.size() != header_.size())
        throw std::logic_error("csv::Writer: row width does not match header");
    rows_.push_back(std::move(row));
}

std::string Writer::str() const {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out.push_back(',');
            out += escape(r[i]);
        }
        out.push_back('\n');
    };
    emit(header_);
    for (const auto& r : rows_) emit(r);
    return out;
}

void Writer::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("scenario-cli", "cannot write '" + path.string() + "'");
    out << str();
    if (!out) throw DataError("scenario-cli", "write failed for '" + path.string() + "'");
}

}  // namespace prices::csv
