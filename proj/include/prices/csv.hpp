#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prices::csv {

/// A parsed CSV file: one header row plus data rows of equal width.
/// Row numbers reported in errors are 1-based file lines (header = line 1).
struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; nullopt when absent.
    std::optional<std::size_t> find(std::string_view name) const;
    /// Index of a header column; throws DataError naming the file when absent.
    std::size_t require(std::string_view name) const;

    /// Parses cell (row, col) as a finite double, throwing DataError with the
    /// file, line and column name on failure.
    double number(std::size_t row, std::size_t col) const;
};

Table parse(std::string_view text, std::string source = "<memory>");
Table read(const std::filesystem::path& path);

/// Throws DataError if any header name appears twice.
void require_unique_header(const Table& t);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_exact(double v);
/// Fixed notation with 6 decimals (monetary columns).
std::string format_money(double v);
/// 6 significant digits (indices and rates).
std::string format_index(double v);

/// Quotes a field if it contains a separator, quote or newline.
std::string escape(std::string_view field);

/// Accumulates rows and writes a CSV file.
class Writer {
public:
    explicit Writer(std::vector<std::string> header);

    void add_row(std::vector<std::string> row);
    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace prices::csv
