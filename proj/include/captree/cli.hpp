#pragma once

#include <map>
#include <ostream>
#include <string>
#include <string_view>

#include "captree/tree.hpp"

namespace captree {

/// Key-value defaults read from a config file: "key = value" lines, '#'
/// comments. Known keys: p, s, delta, depth, tol, max_iter, seed, samples, format.
using CliConfig = std::map<std::string, std::string>;

CliConfig parse_config(std::string_view text);
CliConfig load_config(const std::string& path);

/// Tree from a generator spec or a file path:
///   binary:H, binary:B:H, homogeneous:B:H[:scale:ratio], chain:H,
///   pis:KIND:DEPTH:S (the dyadic space tree with weight pi_s; needs p),
/// anything else is read as a tree file.
WeightedTree tree_from_spec(std::string_view spec, double p);

/// leaves | root | depth:K | nodes:L1,L2,... (labels as in the tree file).
BoundarySet set_from_spec(const WeightedTree& tree, std::string_view spec);

/// Entry point of the command-line tool. Exit codes: 0 success, 1 malformed
/// input, 2 a checked inequality failed, 3 an oracle did not converge.
/// The config path comes from --config or the CAPTREE_CONFIG variable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace captree
