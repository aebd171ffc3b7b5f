#include <cstdio>
#include <cstdlib>
#include <vector>

#include "captree/acceptance.hpp"

// One PASS/FAIL line per criterion; optional arguments pick criteria by number.
int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const auto results = captree::run_acceptance(only, [](const captree::CriterionResult& r) {
        std::printf("%s  (%.2f s)\n", captree::format_criterion(r).c_str(), r.seconds);
        std::fflush(stdout);
    });
    int passed = 0;
    for (const auto& r : results) passed += r.pass;
    std::printf("%d/%zu criteria passed\n", passed, results.size());
    return passed == static_cast<int>(results.size()) ? 0 : 1;
}
