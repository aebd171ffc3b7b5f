#include "captree/tree_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "captree/errors.hpp"

namespace captree {

namespace {

constexpr std::string_view kHeader = "captree-tree 1";

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line_no) {
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw InputError("line " + std::to_string(line_no) + ": cannot parse number '" + std::string(tok) + "'");
    }
    return value;
}

}  // namespace

std::string serialize_tree(const WeightedTree& tree) {
    std::string out;
    out.reserve(tree.size() * 32 + 32);
    out += kHeader;
    out += '\n';
    if (tree.delta()) {
        out += "delta " + format_double(*tree.delta()) + '\n';
    }
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        out += std::to_string(tree.label(id));
        out += ' ';
        auto par = tree.parent(id);
        out += par ? std::to_string(tree.label(*par)) : std::string("null");
        out += ' ';
        out += format_double(tree.weight(id));
        out += '\n';
    }
    return out;
}

WeightedTree parse_tree(std::string_view text) {
    std::vector<NodeRecord> records;
    std::optional<double> delta;
    bool seen_header = false;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        auto toks = split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        if (!seen_header) {
            if (toks.size() != 2 || toks[0] != "captree-tree" || toks[1] != "1") {
                throw InputError("line " + std::to_string(line_no) + ": missing 'captree-tree 1' header");
            }
            seen_header = true;
            continue;
        }
        if (toks[0] == "delta") {
            if (toks.size() != 2 || delta || !records.empty()) {
                throw InputError("line " + std::to_string(line_no) + ": malformed delta header");
            }
            delta = parse_number<double>(toks[1], line_no);
            continue;
        }
        if (toks.size() != 3) {
            throw InputError("line " + std::to_string(line_no) + ": expected '<id> <parent|null> <weight>'");
        }
        NodeRecord r;
        r.id = parse_number<std::int64_t>(toks[0], line_no);
        if (toks[1] != "null") r.parent = parse_number<std::int64_t>(toks[1], line_no);
        r.weight = parse_number<double>(toks[2], line_no);
        records.push_back(r);
    }
    if (!seen_header) throw InputError("empty tree file");
    return WeightedTree::from_records(records, delta);
}

WeightedTree read_tree_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open tree file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_tree(ss.str());
}

void write_tree_file(const WeightedTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write tree file '" + path + "'");
    out << serialize_tree(tree);
}

}  // namespace captree
