#include <iostream>

#include "captree/cli.hpp"

int main(int argc, char** argv) { return captree::run_cli(argc, argv, std::cout, std::cerr); }
