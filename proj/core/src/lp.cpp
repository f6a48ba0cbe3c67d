#include "mmflow/lp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mmflow/errors.hpp"

namespace mmflow::lp {

namespace {

constexpr double kPivotTol = 1e-11;

class Tableau {
public:
    Tableau(const StandardForm& p) : m_(p.rows), n_(p.cols), width_(p.cols + p.rows + 1) {
        t_.assign(m_ * width_, 0.0);
        basis_.resize(m_);
        for (std::size_t r = 0; r < m_; ++r) {
            for (std::size_t j = 0; j < n_; ++j) {
                at(r, j) = p.a[r * n_ + j];
            }
            at(r, n_ + r) = 1.0;
            at(r, width_ - 1) = p.b[r];
            basis_[r] = n_ + r;
        }
        reduced_.assign(width_ - 1, 0.0);
    }

    double& at(std::size_t r, std::size_t j) { return t_[r * width_ + j]; }
    double at(std::size_t r, std::size_t j) const { return t_[r * width_ + j]; }
    double rhs(std::size_t r) const { return at(r, width_ - 1); }

    // Recompute reduced costs d = cost - c_B^T T for the current basis.
    void price(const std::vector<double>& cost) {
        for (std::size_t j = 0; j + 1 < width_; ++j) {
            double d = cost[j];
            for (std::size_t r = 0; r < m_; ++r) {
                d -= cost[basis_[r]] * at(r, j);
            }
            reduced_[j] = d;
        }
    }

    void pivot(std::size_t row, std::size_t col) {
        const double inv = 1.0 / at(row, col);
        for (std::size_t j = 0; j < width_; ++j) {
            at(row, j) *= inv;
        }
        at(row, col) = 1.0;
        for (std::size_t r = 0; r < m_; ++r) {
            if (r == row) {
                continue;
            }
            const double f = at(r, col);
            if (f == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < width_; ++j) {
                at(r, j) -= f * at(row, j);
            }
            at(r, col) = 0.0;
        }
        const double f = reduced_[col];
        if (f != 0.0) {
            for (std::size_t j = 0; j + 1 < width_; ++j) {
                reduced_[j] -= f * at(row, j);
            }
            reduced_[col] = 0.0;
        }
        basis_[row] = col;
    }

    // Bland's rule iterations over columns [0, enter_limit).
    void optimize(std::size_t enter_limit, std::size_t& pivots, std::size_t max_pivots) {
        while (true) {
            std::size_t enter = enter_limit;
            for (std::size_t j = 0; j < enter_limit; ++j) {
                if (reduced_[j] < -kPivotTol) {
                    enter = j;
                    break;
                }
            }
            if (enter == enter_limit) {
                return;
            }
            std::size_t leave = m_;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < m_; ++r) {
                const double a = at(r, enter);
                if (a > kPivotTol) {
                    const double ratio = rhs(r) / a;
                    if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && leave < m_ &&
                                                  basis_[r] < basis_[leave])) {
                        best = ratio;
                        leave = r;
                    }
                }
            }
            if (leave == m_) {
                throw NumericalFailure("linear program is unbounded", 0.0);
            }
            pivot(leave, enter);
            if (++pivots > max_pivots) {
                throw NumericalFailure("simplex pivot cap exceeded", static_cast<double>(pivots));
            }
        }
    }

    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }
    std::size_t basis(std::size_t r) const { return basis_[r]; }

private:
    std::size_t m_, n_, width_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
    std::vector<double> reduced_;
};

}  // namespace

Solution solve(const StandardForm& p, std::size_t max_pivots) {
    if (p.a.size() != p.rows * p.cols || p.b.size() != p.rows || p.c.size() != p.cols) {
        throw InvalidInput("linear program dimensions are inconsistent");
    }
    for (double v : p.b) {
        if (v < 0.0) {
            throw InvalidInput("standard-form right-hand side must be nonnegative");
        }
    }
    const std::size_t m = p.rows;
    const std::size_t n = p.cols;
    Tableau tab(p);
    std::size_t pivots = 0;

    // Phase 1: minimize the sum of artificials.
    std::vector<double> cost(n + m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        cost[n + r] = 1.0;
    }
    tab.price(cost);
    tab.optimize(n + m, pivots, max_pivots);
    double infeasibility = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        if (tab.basis(r) >= n) {
            infeasibility += tab.rhs(r);
        }
    }
    if (infeasibility > 1e-9) {
        throw InvalidInput("linear program is infeasible (phase-one residual " +
                           std::to_string(infeasibility) + ")");
    }
    // Drive zero-level artificials out where a structural column allows it;
    // rows where none does are redundant and keep their artificial at zero.
    for (std::size_t r = 0; r < m; ++r) {
        if (tab.basis(r) < n) {
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(tab.at(r, j)) > 1e-9) {
                tab.pivot(r, j);
                ++pivots;
                break;
            }
        }
    }

    // Phase 2 on the structural columns only.
    std::fill(cost.begin(), cost.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        cost[j] = p.c[j];
    }
    tab.price(cost);
    tab.optimize(n, pivots, max_pivots);

    Solution s;
    s.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        if (tab.basis(r) < n) {
            s.x[tab.basis(r)] = std::max(0.0, tab.rhs(r));
        }
    }
    s.duals.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double y = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            y += cost[tab.basis(r)] * tab.at(r, n + i);
        }
        s.duals[i] = y;
    }
    for (std::size_t j = 0; j < n; ++j) {
        s.objective += p.c[j] * s.x[j];
    }
    s.pivots = pivots;
    return s;
}

}  // namespace mmflow::lp
