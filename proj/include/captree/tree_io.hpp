#pragma once

#include <string>
#include <string_view>

#include "captree/tree.hpp"

namespace captree {

// Text tree format, one record per line:
//
//   captree-tree 1
//   delta 0.5              (optional)
//   <id> <parent-id|null> <weight>
//
// Blank lines and lines starting with '#' are ignored when parsing. Records
// are written in breadth-first order with 17 significant digits, so
// serialize(parse(serialize(t))) reproduces the same bytes.

std::string serialize_tree(const WeightedTree& tree);
WeightedTree parse_tree(std::string_view text);

WeightedTree read_tree_file(const std::string& path);
void write_tree_file(const WeightedTree& tree, const std::string& path);

}  // namespace captree
