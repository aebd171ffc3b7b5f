#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "captree/lab.hpp"

namespace captree {

enum class ReportFormat { Table, Csv, Jsonl };

/// "table", "csv" or "jsonl"; anything else is an InputError.
ReportFormat parse_format(std::string_view name);

using ReportValue = std::variant<double, std::int64_t, bool, std::string>;

/// Rows of named values with a fixed column order.
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<ReportValue>> rows;

    /// Appends a row; throws InputError when its width differs from the header.
    void add(std::vector<ReportValue> row);
};

/// Renders the table. Reals use 12 significant digits. An empty table gives
/// the header alone (no output at all for jsonl, which has no header line).
std::string emit_report(const ResultTable& table, ReportFormat format);

/// One row per report. Runtime is left out unless asked for, so output stays
/// byte-identical between runs.
ResultTable reports_table(const std::vector<CheckReport>& reports, bool with_runtime = false);

/// The plot series of a report as (x, y) rows.
ResultTable series_table(const CheckReport& report, std::string x_name = "depth", std::string y_name = "ratio");

/// %.12g, with inf and nan spelled out.
std::string format_real(double x);

}  // namespace captree
