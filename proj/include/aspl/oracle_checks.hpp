#ifndef ASPL_ORACLE_CHECKS_HPP
#define ASPL_ORACLE_CHECKS_HPP

#include "aspl/core.hpp"

#include <cstdint>
#include <string>

namespace aspl {

struct OracleSuiteReport {
    std::string name;
    int cases = 0;
    int failures = 0;
    double max_error = 0;
    double seconds = 0;
    std::string first_failure;

    bool passed() const { return cases > 0 && failures == 0; }
};

/// Minimum of sum_j v_j (1 - y_j s_j)_+ by enumerating all-negative and every one-hot vector.
double brute_force_label_objective(const Vector<double>& scores, const Vector<double>& weights);

/// Grid argmin over v in {0, step, ..., 1} of C v l + lambda (v^2/2 - v).
double grid_weight(double loss, double c, double lambda, double step = 1e-4);

/// Pseudo-label solver vs. enumeration on random instances with m <= 6.
OracleSuiteReport check_label_solver(int cases, std::uint64_t seed, double tolerance = 1e-12);

/// Closed-form weight vs. grid search.
OracleSuiteReport check_weight_closed_form(int cases, std::uint64_t seed, double tolerance = 1e-3);

/// Monotone in loss, monotone in pace, range in [0, 1].
OracleSuiteReport check_weight_axioms(int cases, std::uint64_t seed);

}  // namespace aspl

#endif  // ASPL_ORACLE_CHECKS_HPP
