#pragma once

#include <cstddef>
#include <vector>

namespace mmflow::lp {

// min c^T x  subject to  A x = b, x >= 0, with b >= 0. A is row-major.
struct StandardForm {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> c;
};

struct Solution {
    std::vector<double> x;
    // Equality-constraint multipliers y with c - A^T y >= 0 at optimality.
    std::vector<double> duals;
    double objective = 0.0;
    std::size_t pivots = 0;
};

// Dense two-phase tableau simplex with Bland's rule (no cycling on the
// highly degenerate transport polytopes). Redundant equality rows are
// tolerated. Throws InvalidInput if infeasible, NumericalFailure if
// unbounded or the pivot cap is hit.
Solution solve(const StandardForm& problem, std::size_t max_pivots = 1'000'000);

}  // namespace mmflow::lp
