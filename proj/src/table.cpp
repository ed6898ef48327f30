#include "overlapkit/table.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "overlapkit/errors.hpp"

namespace overlapkit {

void Table::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw ParameterError("row has " + std::to_string(row.size()) + " cells, table has " +
                             std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
        if (columns[k] == name) return k;
    throw ParameterError("no column named " + name);
}

std::string Table::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    throw ParameterError("no metadata key " + key);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && !s.empty()) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string cell_text(const Cell& c) {
    struct V {
        std::string operator()(std::monostate) const { return ""; }
        std::string operator()(double d) const { return format_double(d); }
        std::string operator()(long long i) const { return std::to_string(i); }
        std::string operator()(const std::string& s) const { return csv_escape(s); }
    };
    return std::visit(V{}, c);
}

// Splits one CSV record; `quoted` reports which fields were quoted.
std::vector<std::string> split_record(const std::string& line, std::vector<bool>& quoted) {
    std::vector<std::string> out;
    quoted.clear();
    std::string cur;
    bool inq = false, wasq = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (inq) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (c == '"') {
                inq = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            inq = wasq = true;
        } else if (c == ',') {
            out.push_back(cur);
            quoted.push_back(wasq);
            cur.clear();
            wasq = false;
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (inq) throw ParameterError("unterminated quote in CSV record");
    out.push_back(cur);
    quoted.push_back(wasq);
    return out;
}

Cell parse_cell(const std::string& s, bool quoted) {
    if (quoted) return s;
    if (s.empty()) return std::monostate{};
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    std::size_t used = 0;
    if (s.find_first_of(".eE") == std::string::npos) {
        try {
            const long long v = std::stoll(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
    } else {
        try {
            const double v = std::stod(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
    }
    return s;
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

std::string json_cell(const Cell& c) {
    struct V {
        std::string operator()(std::monostate) const { return "null"; }
        std::string operator()(double d) const { return std::isfinite(d) ? format_double(d) : "null"; }
        std::string operator()(long long i) const { return std::to_string(i); }
        std::string operator()(const std::string& s) const { return json_string(s); }
    };
    return std::visit(V{}, c);
}

}  // namespace

void write_csv(const Table& t, std::ostream& out) {
    for (const auto& [k, v] : t.meta) out << "# " << k << ": " << v << '\n';
    for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? "," : "") << csv_escape(t.columns[k]);
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << cell_text(row[k]);
        out << '\n';
    }
}

void write_json(const Table& t, std::ostream& out) {
    out << "{\n  \"meta\": {";
    for (std::size_t k = 0; k < t.meta.size(); ++k)
        out << (k ? ", " : "") << json_string(t.meta[k].first) << ": " << json_string(t.meta[k].second);
    out << "},\n  \"columns\": [";
    for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? ", " : "") << json_string(t.columns[k]);
    out << "],\n  \"rows\": [";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out << (r ? ",\n    {" : "\n    {");
        for (std::size_t k = 0; k < t.columns.size(); ++k)
            out << (k ? ", " : "") << json_string(t.columns[k]) << ": " << json_cell(t.rows[r][k]);
        out << "}";
    }
    out << (t.rows.empty() ? "]\n}\n" : "\n  ]\n}\n");
}

Table read_csv(std::istream& in) {
    Table t;
    std::string line;
    bool have_header = false;
    std::vector<bool> quoted;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header && line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ", 2);
            if (colon == std::string::npos) throw ParameterError("bad metadata line: " + line);
            t.meta.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
            continue;
        }
        if (!have_header) {
            t.columns = split_record(line, quoted);
            have_header = true;
            continue;
        }
        if (line.empty() && t.columns.size() != 1) continue;
        const auto fields = split_record(line, quoted);
        std::vector<Cell> row;
        for (std::size_t k = 0; k < fields.size(); ++k) row.push_back(parse_cell(fields[k], quoted[k]));
        t.add_row(std::move(row));
    }
    if (!have_header) throw ParameterError("CSV has no header line");
    return t;
}

Table read_json(std::istream& in) {
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ParameterError(std::string("bad JSON table: ") + e.what());
    }
    Table t;
    for (const auto& [k, v] : j.at("meta").items()) t.meta.emplace_back(k, v.get<std::string>());
    for (const auto& c : j.at("columns")) t.columns.push_back(c.get<std::string>());
    for (const auto& r : j.at("rows")) {
        std::vector<Cell> row;
        for (const auto& c : t.columns) {
            const auto& v = r.at(c);
            if (v.is_null())
                row.emplace_back(std::monostate{});
            else if (v.is_number_integer())
                row.emplace_back(v.get<long long>());
            else if (v.is_number())
                row.emplace_back(v.get<double>());
            else
                row.emplace_back(v.get<std::string>());
        }
        t.add_row(std::move(row));
    }
    return t;
}

}  // namespace overlapkit
