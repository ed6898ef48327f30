#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace overlapkit {

// monostate is the null sentinel (a row that could not be evaluated).
using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, std::string>> meta;

    void add_row(std::vector<Cell> row);
    std::size_t column(const std::string& name) const;  // throws if absent
    std::string meta_value(const std::string& key) const;
};

// 17 significant digits; integral values keep a trailing ".0" so they read back as doubles.
std::string format_double(double v);

// "# key: value" metadata lines, a header line, then rows. Null cells are empty fields.
void write_csv(const Table& t, std::ostream& out);
// {"meta": {...}, "columns": [...], "rows": [{col: value, ...}, ...]}; nulls are JSON null.
void write_json(const Table& t, std::ostream& out);

Table read_csv(std::istream& in);
Table read_json(std::istream& in);

}  // namespace overlapkit
