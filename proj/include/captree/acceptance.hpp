#pragma once

#include <functional>
#include <string>
#include <vector>

namespace captree {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    bool nonconvergence = false;  // an oracle gave up; maps to exit code 3
    std::string detail;           // measured values
    double seconds = 0.0;
};

/// Runs the acceptance criteria (all of them when `only` is empty), calling
/// `sink` after each one. Seeds are fixed, so results are reproducible.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& only = {},
                                            const std::function<void(const CriterionResult&)>& sink = {});

/// "PASS  3  point capacity formula: ..." style line.
std::string format_criterion(const CriterionResult& r);

/// 0 when everything passed, 3 when some criterion failed only through
/// oracle non-convergence, 2 otherwise.
int acceptance_exit_code(const std::vector<CriterionResult>& results);

int acceptance_count();

}  // namespace captree
