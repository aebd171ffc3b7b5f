#include <gtest/gtest.h>

#include "captree/errors.hpp"
#include "captree/report.hpp"

using namespace captree;

TEST(Report, EmptyTableGivesHeaderOnly) {
    ResultTable t;
    t.columns = {"depth", "capacity"};
    EXPECT_EQ(emit_report(t, ReportFormat::Csv), "depth,capacity\n");
    EXPECT_EQ(emit_report(t, ReportFormat::Table), "depth  capacity\n-----  --------\n");
    EXPECT_EQ(emit_report(t, ReportFormat::Jsonl), "");
}

TEST(Report, SingleRowTwelveDigits) {
    ResultTable t;
    t.columns = {"capacity"};
    t.add({8.0 / 15.0});
    EXPECT_EQ(emit_report(t, ReportFormat::Csv), "capacity\n0.533333333333\n");
    EXPECT_EQ(emit_report(t, ReportFormat::Jsonl), "{\"capacity\":0.533333333333}\n");
    EXPECT_THROW(t.add({1.0, 2.0}), InputError);
}

TEST(Report, SweepKeepsOrderAndQuotes) {
    ResultTable t;
    t.columns = {"depth", "value", "note"};
    for (std::int64_t d = 3; d <= 8; ++d) t.add({d, 1.0 / d, std::string(d == 5 ? "a,\"b\"" : "")});
    const std::string csv = emit_report(t, ReportFormat::Csv);
    EXPECT_NE(csv.find("5,0.2,\"a,\"\"b\"\"\"\n"), std::string::npos);
    std::size_t pos = 0;
    for (int d = 3; d <= 8; ++d) {
        const auto at = csv.find("\n" + std::to_string(d) + ",", pos);
        ASSERT_NE(at, std::string::npos);
        pos = at + 1;
    }
    EXPECT_EQ(emit_report(t, ReportFormat::Csv), csv);
}

TEST(Report, SpecialValuesAndFormats) {
    EXPECT_EQ(format_real(1.0 / 0.0), "inf");
    EXPECT_EQ(format_real(0.1), "0.1");
    EXPECT_EQ(parse_format("jsonl"), ReportFormat::Jsonl);
    EXPECT_THROW(parse_format("xml"), InputError);
    CheckReport r;
    r.name = "x";
    r.details = {{"a", 1.5}, {"b", 2.0}};
    r.bound = 2.0;
    const auto t = reports_table({r});
    EXPECT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(std::get<std::string>(t.rows[0].back()), "a=1.5;b=2");
    EXPECT_EQ(reports_table({r}, true).columns.back(), "runtime_ms");
}
