#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mmflow/errors.hpp"
#include "mmflow/jko.hpp"

namespace {

using namespace mmflow;

const Domain unit(0.0, 1.0);

ParticleDensity random_density(std::mt19937_64& rng, std::size_t n, double lo = 0.05, double hi = 0.95) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> x(n);
    for (double& v : x) {
        v = u(rng);
    }
    std::sort(x.begin(), x.end());
    return ParticleDensity(unit, x);
}

TEST(StepProblem, Validation) {
    const auto a = ParticleDensity::uniform(unit, 4);
    const auto q = CostFunction::quadratic_pairwise(unit);
    EXPECT_NO_THROW(StepProblem({a, a}, 0, InternalEnergy::entropy(), q, 0.1));
    EXPECT_THROW(StepProblem({a}, 0, InternalEnergy::entropy(), q, 0.1), InvalidInput);
    EXPECT_THROW(StepProblem({a, a}, 2, InternalEnergy::entropy(), q, 0.1), InvalidInput);
    EXPECT_THROW(StepProblem({a, a}, 0, InternalEnergy::entropy(), q, 0.0), InvalidInput);
    EXPECT_THROW(StepProblem({a, ParticleDensity::uniform(unit, 5)}, 0, InternalEnergy::entropy(), q, 0.1),
                 InvalidInput);
    EXPECT_THROW(StepProblem({a, ParticleDensity::uniform(Domain(0.0, 2.0), 4)}, 0, InternalEnergy::entropy(), q, 0.1),
                 InvalidInput);
    const auto one = ParticleDensity(unit, {0.5});
    EXPECT_THROW(StepProblem({one, one}, 0, InternalEnergy::entropy(), q, 0.1), InvalidInput);
    EXPECT_NO_THROW(StepProblem({one, one}, 0, InternalEnergy::zero(), q, 0.1));
}

TEST(Objective, ClosedFormValue) {
    const ParticleDensity prev(unit, {0.2, 0.6});
    const ParticleDensity other(unit, {0.3, 0.5});
    const StepProblem p({prev, other}, 0, InternalEnergy::zero(), CostFunction::quadratic_pairwise(unit), 0.1);
    const std::vector<double> x{0.25, 0.55};
    // (1/2)(0.05^2 + 0.05^2) + 0.2 (1/2)(0.05^2 + 0.05^2)
    EXPECT_NEAR(objective(p, x), 0.0025 + 0.2 * 0.0025, 1e-15);
    EXPECT_NEAR(objective_delta(p, prev.position_vector(), x),
                objective(p, x) - objective(p, prev.position_vector()), 1e-15);
    EXPECT_THROW(objective(p, std::vector<double>{0.5, 0.4}), InvalidInput);
    EXPECT_THROW(objective(p, std::vector<double>{0.5}), InvalidInput);
    EXPECT_THROW(objective(p, std::vector<double>{0.5, 1.4}), InvalidInput);
}

TEST(Objective, GradientMatchesCentralDifferences) {
    std::mt19937_64 rng(47);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + trial % 10;
        const auto prev = random_density(rng, n);
        const auto other = random_density(rng, n);
        const auto energy = trial % 2 ? InternalEnergy::entropy() : InternalEnergy::power_law(2.0);
        const auto cost = trial % 3 ? CostFunction::quadratic_pairwise(unit) : CostFunction::barycenter(unit, {2.0});
        const StepProblem p({prev, other}, trial % 2, energy, cost, 0.05);
        const auto x = random_density(rng, n).position_vector();
        const auto g = objective_gradient(p, x);
        double scale = 0.0;
        for (double v : g) {
            scale = std::max(scale, std::abs(v));
        }
        for (std::size_t j = 0; j < n; ++j) {
            double gap = 1.0;
            if (j > 0) gap = std::min(gap, x[j] - x[j - 1]);
            if (j + 1 < n) gap = std::min(gap, x[j + 1] - x[j]);
            const double step = std::min(1e-6, 1e-3 * gap);
            auto up = x, down = x;
            up[j] += step;
            down[j] -= step;
            const double fd = objective_delta(p, down, up) / (2.0 * step);
            worst = std::max(worst, std::abs(fd - g[j]) / scale);
        }
    }
    EXPECT_LE(worst, 1e-5);
}

TEST(Projection, KnownCases) {
    EXPECT_EQ(project_ordered_box(std::vector<double>{0.3, 0.1}, 0.0, 1.0), (std::vector<double>{0.2, 0.2}));
    EXPECT_EQ(project_ordered_box(std::vector<double>{-1.0, 0.5, 2.0}, 0.0, 1.0),
              (std::vector<double>{0.0, 0.5, 1.0}));
    const auto p = project_ordered_box(std::vector<double>{0.9, 0.5, 0.1}, 0.0, 1.0);
    for (double v : p) {
        EXPECT_NEAR(v, 0.5, 1e-15);
    }
}

TEST(Projection, VariationalInequality) {
    // P is the projection iff <y - P, z - P> <= 0 for every feasible z.
    std::mt19937_64 rng(53);
    std::normal_distribution<double> g(0.5, 0.7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 12;
        std::vector<double> y(n);
        for (double& v : y) {
            v = g(rng);
        }
        const auto p = project_ordered_box(y, 0.0, 1.0);
        ASSERT_TRUE(std::is_sorted(p.begin(), p.end()));
        ASSERT_GE(p.front(), 0.0);
        ASSERT_LE(p.back(), 1.0);
        for (int k = 0; k < 20; ++k) {
            const auto z = random_density(rng, n, 0.0, 1.0).position_vector();
            double inner = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                inner += (y[j] - p[j]) * (z[j] - p[j]);
            }
            EXPECT_LE(inner, 1e-12);
        }
    }
}

TEST(SolveStep, SingleParticleClosedForm) {
    for (double h : {1e-3, 1e-2, 1e-1}) {
        const double xk = 0.2;
        const double y = 0.7;
        const StepProblem p({ParticleDensity(unit, {xk}), ParticleDensity(unit, {y})}, 0, InternalEnergy::zero(),
                            CostFunction::quadratic_pairwise(unit), h);
        const auto s = solve_step(p);
        EXPECT_NEAR(s.minimizer[0], (xk + 2.0 * h * y) / (1.0 + 2.0 * h), 1e-10);
    }
}

TEST(SolveStep, AttractionAppliesParticleWise) {
    std::mt19937_64 rng(59);
    const double h = 0.05;
    const auto prev = random_density(rng, 16);
    const auto other = random_density(rng, 16);
    const StepProblem p({prev, other}, 0, InternalEnergy::zero(), CostFunction::quadratic_pairwise(unit), h);
    const auto s = solve_step(p);
    for (std::size_t j = 0; j < 16; ++j) {
        EXPECT_NEAR(s.minimizer[j], (prev[j] + 2.0 * h * other[j]) / (1.0 + 2.0 * h), 1e-10);
    }
}

TEST(SolveStep, ZeroEverythingIsFixedPoint) {
    const auto prev = ParticleDensity(unit, {0.1, 0.1, 0.4, 0.9});
    const StepProblem p({prev, prev}, 1, InternalEnergy::zero(), CostFunction::zero(unit, 2), 0.1);
    const auto s = solve_step(p);
    EXPECT_EQ(s.minimizer, prev);
    EXPECT_EQ(s.objective_change, 0.0);
    EXPECT_EQ(s.w2_to_previous, 0.0);
}

TEST(SolveStep, SymmetricDataStaysSymmetric) {
    const auto prev = ParticleDensity(unit, {0.3, 0.4, 0.45, 0.55, 0.6, 0.7});
    const StepProblem p({prev, prev}, 0, InternalEnergy::entropy(), CostFunction::zero(unit, 2), 0.01);
    const auto s = solve_step(p);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(s.minimizer[j] - 0.5, 0.5 - s.minimizer[5 - j], 1e-9);
    }
    // Entropy spreads the particles.
    EXPECT_LT(s.minimizer[0], 0.3);
    EXPECT_GT(s.minimizer[5], 0.7);
}

TEST(SolveStep, DescentAndResidualOnRandomProblems) {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 32;
        const std::vector<ParticleDensity> frozen{random_density(rng, n), random_density(rng, n),
                                                  random_density(rng, n)};
        const auto energy = trial % 2 ? InternalEnergy::entropy() : InternalEnergy::power_law(2.0);
        const StepProblem p(frozen, trial % 3, energy, CostFunction::barycenter(unit, {1.0, 1.0}, trial % 3), 0.01);
        const auto s = solve_step(p);
        EXPECT_LE(s.objective_change, 10.0 * s.tol);
        EXPECT_LE(s.first_order_residual, s.tol);
        EXPECT_LE(euler_lagrange_residual(p, s), 10.0 * s.tol);
        EXPECT_NEAR(s.objective_value - s.objective_at_previous, s.objective_change,
                    1e-9 * (1.0 + std::abs(s.objective_value)));
        EXPECT_NEAR(s.w2_to_previous, w2_distance(s.minimizer, p.previous()), 1e-15);
    }
}

TEST(SolveStep, MinimizerBeatsPerturbations) {
    std::mt19937_64 rng(67);
    const std::size_t n = 12;
    const std::vector<ParticleDensity> frozen{random_density(rng, n), random_density(rng, n)};
    const StepProblem p(frozen, 0, InternalEnergy::entropy(), CostFunction::quadratic_pairwise(unit), 0.02);
    const auto s = solve_step(p, {1e-12, 100000});
    std::normal_distribution<double> g(0.0, 1e-3);
    for (int k = 0; k < 200; ++k) {
        std::vector<double> z = s.minimizer.position_vector();
        for (double& v : z) {
            v += g(rng);
        }
        z = project_ordered_box(z, 0.0, 1.0);
        EXPECT_GE(objective_delta(p, s.minimizer.position_vector(), z), -1e-12);
    }
}

TEST(SolveStep, WarmStartIndependence) {
    std::mt19937_64 rng(71);
    const std::size_t n = 20;
    const std::vector<ParticleDensity> frozen{random_density(rng, n), random_density(rng, n)};
    const StepProblem p(frozen, 1, InternalEnergy::power_law(2.0), CostFunction::quadratic_pairwise(unit), 0.02);
    const auto a = solve_step(p, {1e-11, 100000});
    const auto start = random_density(rng, n).position_vector();
    const auto b = solve_step(p, {1e-11, 100000}, std::span<const double>(start));
    EXPECT_LE(w2_distance(a.minimizer, b.minimizer), 1e-7);
}

TEST(SolveStep, IterationCapThrows) {
    const auto prev = ParticleDensity(unit, {0.3, 0.4, 0.45, 0.55, 0.6, 0.7});
    const StepProblem p({prev, prev}, 0, InternalEnergy::entropy(), CostFunction::zero(unit, 2), 0.01);
    EXPECT_THROW(solve_step(p, {1e-14, 1}), NumericalFailure);
}

TEST(SolveStep, SmallerStepMovesLess) {
    std::mt19937_64 rng(73);
    const auto prev = random_density(rng, 24);
    double last = -1.0;
    for (double h : {1e-3, 1e-2, 1e-1}) {
        const StepProblem p({prev, prev}, 0, InternalEnergy::entropy(), CostFunction::zero(unit, 2), h);
        const double w = solve_step(p).w2_to_previous;
        EXPECT_GT(w, last);
        last = w;
    }
}

}  // namespace
