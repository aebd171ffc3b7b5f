#include "captree/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "captree/errors.hpp"

namespace captree {

namespace {

std::string text_of(const ReportValue& v) {
    if (const double* d = std::get_if<double>(&v)) return format_real(*d);
    if (const std::int64_t* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (const bool* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
    return std::get<std::string>(v);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

nlohmann::ordered_json json_of(const ReportValue& v) {
    if (const double* d = std::get_if<double>(&v)) {
        if (!std::isfinite(*d)) return format_real(*d);
        // Round through the 12-digit text so the record carries the same digits as the table.
        return std::stod(format_real(*d));
    }
    if (const std::int64_t* i = std::get_if<std::int64_t>(&v)) return *i;
    if (const bool* b = std::get_if<bool>(&v)) return *b;
    return std::get<std::string>(v);
}

ReportValue optional_real(const std::optional<double>& x) {
    if (x) return *x;
    return std::string();
}

}  // namespace

std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

ReportFormat parse_format(std::string_view name) {
    if (name == "table") return ReportFormat::Table;
    if (name == "csv") return ReportFormat::Csv;
    if (name == "jsonl") return ReportFormat::Jsonl;
    throw InputError("unknown output format '" + std::string(name) + "' (table, csv, jsonl)");
}

void ResultTable::add(std::vector<ReportValue> row) {
    if (row.size() != columns.size()) throw InputError("row width does not match the header");
    rows.push_back(std::move(row));
}

std::string emit_report(const ResultTable& table, ReportFormat format) {
    std::ostringstream os;
    switch (format) {
        case ReportFormat::Csv: {
            for (std::size_t c = 0; c < table.columns.size(); ++c) os << (c ? "," : "") << csv_field(table.columns[c]);
            os << '\n';
            for (const auto& row : table.rows) {
                for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_field(text_of(row[c]));
                os << '\n';
            }
            break;
        }
        case ReportFormat::Jsonl: {
            for (const auto& row : table.rows) {
                nlohmann::ordered_json rec = nlohmann::ordered_json::object();
                for (std::size_t c = 0; c < row.size(); ++c) rec[table.columns[c]] = json_of(row[c]);
                os << rec.dump() << '\n';
            }
            break;
        }
        case ReportFormat::Table: {
            std::vector<std::vector<std::string>> cells;
            std::vector<std::size_t> width;
            for (const auto& h : table.columns) width.push_back(h.size());
            for (const auto& row : table.rows) {
                auto& out = cells.emplace_back();
                for (std::size_t c = 0; c < row.size(); ++c) {
                    out.push_back(text_of(row[c]));
                    width[c] = std::max(width[c], out.back().size());
                }
            }
            auto line = [&](const std::vector<std::string>& fields) {
                std::string s;
                for (std::size_t c = 0; c < fields.size(); ++c) {
                    if (c) s += "  ";
                    s += fields[c];
                    if (c + 1 < fields.size()) s.append(width[c] - fields[c].size(), ' ');
                }
                os << s << '\n';
            };
            line(table.columns);
            std::vector<std::string> rule;
            for (std::size_t w : width) rule.emplace_back(w, '-');
            line(rule);
            for (const auto& r : cells) line(r);
            break;
        }
    }
    return os.str();
}

ResultTable reports_table(const std::vector<CheckReport>& reports, bool with_runtime) {
    ResultTable t;
    t.columns = {"check", "instance", "left", "right", "ratio", "bound", "empirical", "pass", "seed", "note", "details"};
    if (with_runtime) t.columns.push_back("runtime_ms");
    for (const auto& r : reports) {
        std::string details;
        for (const auto& [k, v] : r.details) {
            if (!details.empty()) details += ";";
            details += k + "=" + format_real(v);
        }
        std::vector<ReportValue> row{r.name,
                                     r.instance,
                                     r.left,
                                     r.right,
                                     r.ratio,
                                     optional_real(r.bound),
                                     optional_real(r.empirical),
                                     r.pass,
                                     static_cast<std::int64_t>(r.seed),
                                     r.note,
                                     details};
        if (with_runtime) row.emplace_back(r.runtime_ms);
        t.add(std::move(row));
    }
    return t;
}

ResultTable series_table(const CheckReport& report, std::string x_name, std::string y_name) {
    ResultTable t;
    t.columns = {std::move(x_name), std::move(y_name)};
    for (const auto& [x, y] : report.series) t.add({x, y});
    return t;
}

}  // namespace captree
