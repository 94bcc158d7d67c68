#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gravflow::csv {

// A parsed CSV file with a header row. Cell accessors throw InputError that
// names the file, the 1-based data row and the column.
class Table {
public:
    static Table read(const std::filesystem::path& path);
    static Table parse(std::string_view text, std::string source);

    std::size_t rows() const { return rows_.size(); }
    const std::string& source() const { return source_; }

    std::optional<std::size_t> find_column(std::string_view name) const;
    std::size_t require_column(std::string_view name) const;

    const std::string& cell(std::size_t row, std::size_t col) const;
    bool empty_cell(std::size_t row, std::size_t col) const;

    double number(std::size_t row, std::size_t col) const;
    std::int64_t integer(std::size_t row, std::size_t col) const;
    bool boolean(std::size_t row, std::size_t col) const;

    std::optional<double> opt_number(std::size_t row, std::size_t col) const;
    std::optional<std::int64_t> opt_integer(std::size_t row, std::size_t col) const;
    std::optional<bool> opt_boolean(std::size_t row, std::size_t col) const;

private:
    [[noreturn]] void fail(std::size_t row, std::size_t col, std::string_view what) const;

    std::string source_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string quote(std::string_view field);
void write(std::ostream& out, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);
void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);

// Shortest representation that parses back to the same double.
std::string format_number(double v);

}  // namespace gravflow::csv
