#include "gravflow/core/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gravflow/core/types.hpp"

namespace gravflow::csv {

namespace {

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

Table Table::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.filename().string());
}

Table Table::parse(std::string_view text, std::string source) {
    Table t;
    t.source_ = std::move(source);
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    bool have_header = false;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        for (auto& f : fields) f = std::string(trim(f));
        if (!have_header) {
            t.header_ = std::move(fields);
            have_header = true;
        } else {
            fields.resize(std::max(fields.size(), t.header_.size()));
            t.rows_.push_back(std::move(fields));
        }
    }
    if (!have_header) throw InputError(t.source_ + ": missing header row");
    return t;
}

std::optional<std::size_t> Table::find_column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return i;
    return std::nullopt;
}

std::size_t Table::require_column(std::string_view name) const {
    auto c = find_column(name);
    if (!c) throw InputError(source_ + ": missing required column '" + std::string(name) + "'");
    return *c;
}

void Table::fail(std::size_t row, std::size_t col, std::string_view what) const {
    throw InputError(source_ + ": row " + std::to_string(row + 1) + ", column '" + header_.at(col) +
                     "': " + std::string(what));
}

const std::string& Table::cell(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }

bool Table::empty_cell(std::size_t row, std::size_t col) const { return cell(row, col).empty(); }

double Table::number(std::size_t row, std::size_t col) const {
    auto v = opt_number(row, col);
    if (!v) fail(row, col, "required value is empty");
    return *v;
}

std::int64_t Table::integer(std::size_t row, std::size_t col) const {
    auto v = opt_integer(row, col);
    if (!v) fail(row, col, "required value is empty");
    return *v;
}

bool Table::boolean(std::size_t row, std::size_t col) const {
    auto v = opt_boolean(row, col);
    if (!v) fail(row, col, "required value is empty");
    return *v;
}

std::optional<double> Table::opt_number(std::size_t row, std::size_t col) const {
    const auto& s = cell(row, col);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) fail(row, col, "non-numeric value '" + s + "'");
    return v;
}

std::optional<std::int64_t> Table::opt_integer(std::size_t row, std::size_t col) const {
    const auto& s = cell(row, col);
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) fail(row, col, "non-integer value '" + s + "'");
    return v;
}

std::optional<bool> Table::opt_boolean(std::size_t row, std::size_t col) const {
    const auto& s = cell(row, col);
    if (s.empty()) return std::nullopt;
    if (s == "1" || s == "true" || s == "TRUE" || s == "True") return true;
    if (s == "0" || s == "false" || s == "FALSE" || s == "False") return false;
    fail(row, col, "non-boolean value '" + s + "'");
}

std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write(std::ostream& out, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    auto emit = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out << ',';
            out << quote(r[i]);
        }
        out << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
}

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    write(out, header, rows);
    if (!out) throw IoError("write failed for " + path.string());
}

std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace gravflow::csv
