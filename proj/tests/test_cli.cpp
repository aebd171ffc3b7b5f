#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "captree/cli.hpp"
#include "captree/errors.hpp"

using namespace captree;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<const char*> args) {
    args.insert(args.begin(), "captree");
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(args.size()), args.data(), out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndBlanks) {
    const auto cfg = parse_config("# defaults\np = 3\n\n  s=0.25   # kernel\nformat = csv\n");
    ASSERT_EQ(cfg.size(), 3u);
    EXPECT_EQ(cfg.at("p"), "3");
    EXPECT_EQ(cfg.at("s"), "0.25");
    EXPECT_EQ(cfg.at("format"), "csv");
}

TEST(Config, RejectsMalformedLines) {
    EXPECT_THROW(parse_config("p 3\n"), InputError);
    EXPECT_THROW(parse_config("p =\n"), InputError);
    EXPECT_THROW(load_config("/nonexistent/captree.cfg"), InputError);
}

TEST(TreeSpec, Generators) {
    EXPECT_EQ(tree_from_spec("binary:3", 2.0).size(), 15u);
    EXPECT_EQ(tree_from_spec("binary:3:2", 2.0).size(), 13u);
    EXPECT_EQ(tree_from_spec("chain:4", 2.0).size(), 5u);
    const auto h = tree_from_spec("homogeneous:2:2:1:0.5", 2.0);
    EXPECT_EQ(h.size(), 7u);
    EXPECT_DOUBLE_EQ(h.weight(h.nodes_at_depth(2).front()), 0.25);
    EXPECT_EQ(tree_from_spec("pis:interval:4:0.5", 2.0).size(), 31u);
    EXPECT_THROW(tree_from_spec("binary:x", 2.0), InputError);
    EXPECT_THROW(tree_from_spec("chain:1:2", 2.0), InputError);
    EXPECT_THROW(tree_from_spec("no_such_file.tree", 2.0), InputError);
}

TEST(SetSpec, Forms) {
    const auto t = tree_from_spec("binary:3", 2.0);
    EXPECT_EQ(set_from_spec(t, "leaves").size(), 8u);
    EXPECT_EQ(set_from_spec(t, "root").size(), 1u);
    EXPECT_EQ(set_from_spec(t, "depth:2").size(), 4u);
    EXPECT_EQ(set_from_spec(t, "nodes:1,2").size(), 2u);
    EXPECT_THROW(set_from_spec(t, "depth:9"), InputError);
    EXPECT_THROW(set_from_spec(t, "nodes:99"), InputError);
    EXPECT_THROW(set_from_spec(t, "everything"), InputError);
}

TEST(Cli, CapPrintsTwelveDigits) {
    const auto r = run({"cap", "--tree", "binary:2:3", "--set", "leaves", "--p", "2", "--format", "csv"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "tree,set,p,capacity\nbinary:2:3,leaves,2,0.533333333333\n");
}

TEST(Cli, OraclesAgree) {
    const auto r = run({"cap", "--tree", "binary:4", "--oracle", "all", "--format", "csv"});
    EXPECT_EQ(r.code, 0);
    std::istringstream lines(r.out);
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    std::vector<std::string> cells;
    std::istringstream cs(row);
    for (std::string c; std::getline(cs, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 7u) << r.out;
    for (std::size_t i = 4; i < 7; ++i) EXPECT_NEAR(std::stod(cells[i]), std::stod(cells[3]), 1e-7) << header;
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run({"cap", "--tree", "badfile"}).code, 1);
    EXPECT_EQ(run({"cap", "--tree", "binary:2", "--p", "1"}).code, 1);
    EXPECT_EQ(run({"cap"}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"check", "nosuch", "--tree", "binary:2"}).code, 1);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"check", "cmcap", "--tree", "binary:4", "--seed", "2"}).code, 0);
}

TEST(Cli, ConfigFileSuppliesDefaults) {
    const std::string path = ::testing::TempDir() + "captree_cli_test.cfg";
    {
        std::ofstream f(path);
        f << "p = 2\nformat = jsonl\n";
    }
    const auto r = run({"--config", path.c_str(), "cap", "--tree", "binary:2:3"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "{\"tree\":\"binary:2:3\",\"set\":\"leaves\",\"p\":2.0,\"capacity\":0.533333333333}\n");
    {
        std::ofstream f(path);
        f << "colour = blue\n";
    }
    EXPECT_EQ(run({"--config", path.c_str(), "cap", "--tree", "binary:2"}).code, 1);
    std::remove(path.c_str());
}

TEST(Cli, RunsAreByteIdentical) {
    const std::vector<const char*> args{"check", "trace", "--tree", "binary:5", "--measure", "random", "--seed", "11"};
    EXPECT_EQ(run(args).out, run(args).out);
}

TEST(Cli, EstimateSweep) {
    const auto r = run({"estimate", "--set", "interval 0 0.25", "--depths", "2..4", "--format", "csv"});
    EXPECT_EQ(r.code, 0);
    std::istringstream lines(r.out);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) ++n;
    EXPECT_EQ(n, 4);
}

TEST(Cli, SelftestSingleCriterion) {
    const auto r = run({"selftest", "--only", "3"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.substr(0, 4), "PASS");
}
