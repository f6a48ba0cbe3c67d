#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mmflow/energy.hpp"
#include "mmflow/errors.hpp"

namespace {

using namespace mmflow;

ParticleDensity random_density(std::mt19937_64& rng, const Domain& d, std::size_t n) {
    std::uniform_real_distribution<double> u(d.lower, d.upper);
    std::vector<double> x(n);
    for (double& v : x) {
        v = u(rng);
    }
    std::sort(x.begin(), x.end());
    return ParticleDensity(d, x);
}

// Gap-sum oracle written directly from the definition.
double direct_energy(const std::function<double(double)>& f, const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        const double gap = x[j + 1] - x[j];
        sum += gap * f(1.0 / (n * gap));
    }
    return sum;
}

TEST(Pressure, ClosedForms) {
    EXPECT_NEAR(pressure(InternalEnergy::entropy(), 2.0), 2.0, 1e-14);
    EXPECT_NEAR(pressure(InternalEnergy::power_law(2.0), 3.0), 9.0, 1e-12);
    EXPECT_NEAR(pressure(InternalEnergy::power_law(3.0), 2.0), 16.0, 1e-12);
    EXPECT_EQ(pressure(InternalEnergy::entropy(), 0.0), 0.0);
    EXPECT_EQ(pressure(InternalEnergy::power_law(1.5), 0.0), 0.0);
    EXPECT_THROW(pressure(InternalEnergy::entropy(), -1.0), DomainError);
}

TEST(Pressure, NonnegativeAndBoundedByEnergy) {
    for (double m : {1.5, 2.0, 3.0, 4.5}) {
        const auto e = InternalEnergy::power_law(m);
        const double c = std::max(1.0, m - 1.0);
        for (int s = 0; s <= 2000; ++s) {
            const double x = 1e6 * std::pow(s / 2000.0, 3);
            EXPECT_GE(pressure(e, x), 0.0);
            EXPECT_LE(pressure(e, x), c * (1.0 + e.value(x)) * (1.0 + 1e-14));
        }
        EXPECT_LE(pressure_bound_constant(e), c + 1e-12);
    }
    const auto ent = InternalEnergy::entropy();
    for (int s = 0; s <= 2000; ++s) {
        const double x = 1e6 * std::pow(s / 2000.0, 3);
        EXPECT_GE(pressure(ent, x), 0.0);
        EXPECT_LE(pressure(ent, x), 1.0 + ent.value(x) + 1e-12);
    }
    EXPECT_LE(pressure_bound_constant(ent), 1.0 + 1e-12);
}

TEST(InternalEnergy, CustomMustVanishAtZero) {
    EXPECT_THROW(InternalEnergy::custom("shifted", [](double x) { return x * x + 1.0; },
                                        [](double x) { return 2.0 * x; }, [](double) { return 2.0; }),
                 InvalidInput);
    EXPECT_THROW(InternalEnergy::power_law(1.0), InvalidInput);
}

TEST(EnergyValue, ZeroKind) {
    const Domain d(0.0, 1.0);
    EXPECT_EQ(energy_value(InternalEnergy::zero(), ParticleDensity(d, {0.3})), 0.0);
    EXPECT_EQ(energy_value(InternalEnergy::zero(), ParticleDensity(d, {0.3, 0.3, 0.9})), 0.0);
}

TEST(EnergyValue, DegenerateInputsRejected) {
    const Domain d(0.0, 1.0);
    EXPECT_THROW(energy_value(InternalEnergy::entropy(), ParticleDensity(d, {0.3})), InvalidInput);
    EXPECT_THROW(energy_value(InternalEnergy::entropy(), ParticleDensity(d, {0.3, 0.3, 0.3})), InvalidInput);
}

TEST(EnergyValue, EntropyOfUniformQuantiles) {
    const auto rho = ParticleDensity::uniform(Domain(0.0, 1.0), 4);
    // Gaps 1/4 reconstruct density 1 between particles: entropy 0 exactly.
    EXPECT_NEAR(energy_value(InternalEnergy::entropy(), rho), 0.0, 1e-15);
    for (std::size_t n : {8u, 64u, 512u}) {
        const double v = energy_value(InternalEnergy::entropy(), ParticleDensity::uniform(Domain(0.0, 1.0), n));
        EXPECT_LE(std::abs(v), 1.0 / static_cast<double>(n));
    }
}

TEST(EnergyValue, PowerLawOfUniformDensity) {
    const auto rho = ParticleDensity::uniform(Domain(0.0, 2.0), 64);
    EXPECT_NEAR(energy_value(InternalEnergy::power_law(2.0), rho), 0.5, 0.02);
}

TEST(EnergyValue, MatchesGapSumDefinition) {
    std::mt19937_64 rng(3);
    const Domain d(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto rho = random_density(rng, d, 2 + trial);
        const auto& x = rho.position_vector();
        EXPECT_NEAR(energy_value(InternalEnergy::entropy(), rho),
                    direct_energy([](double r) { return r * std::log(r); }, x), 1e-10);
        EXPECT_NEAR(energy_value(InternalEnergy::power_law(2.5), rho),
                    direct_energy([](double r) { return std::pow(r, 2.5); }, x),
                    1e-10 * (1.0 + energy_value(InternalEnergy::power_law(2.5), rho)));
    }
}

TEST(EnergyGradient, ZeroAndSymmetricCases) {
    const auto rho = ParticleDensity::uniform(Domain(0.0, 1.0), 10);
    for (double g : energy_gradient(InternalEnergy::zero(), rho)) {
        EXPECT_EQ(g, 0.0);
    }
    const auto g = energy_gradient(InternalEnergy::entropy(), rho);
    for (std::size_t j = 1; j + 1 < g.size(); ++j) {
        EXPECT_NEAR(g[j], 0.0, 1e-14);
    }
    EXPECT_GT(g.front(), 0.0);
    EXPECT_LT(g.back(), 0.0);
}

TEST(EnergyGradient, CentralDifferences) {
    std::mt19937_64 rng(41);
    const Domain d(0.0, 1.0);
    const std::vector<InternalEnergy> energies{InternalEnergy::entropy(), InternalEnergy::power_law(2.0),
                                               InternalEnergy::power_law(3.0)};
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto& e = energies[trial % energies.size()];
        const auto rho = random_density(rng, Domain(0.1, 0.9), 3 + trial % 20);
        const auto g = energy_gradient(e, rho);
        double scale = 0.0;
        for (double v : g) {
            scale = std::max(scale, std::abs(v));
        }
        for (std::size_t j = 0; j < rho.size(); ++j) {
            auto x = rho.position_vector();
            // Step small against the smallest adjacent gap.
            double gapmin = 1.0;
            if (j > 0) gapmin = std::min(gapmin, x[j] - x[j - 1]);
            if (j + 1 < x.size()) gapmin = std::min(gapmin, x[j + 1] - x[j]);
            const double step = std::min(1e-6, 1e-3 * gapmin);
            x[j] += step;
            const double up = energy_value(e, ParticleDensity(d, x));
            x[j] -= 2.0 * step;
            const double down = energy_value(e, ParticleDensity(d, x));
            const double fd = (up - down) / (2.0 * step);
            worst = std::max(worst, std::abs(fd - g[j]) / std::max(scale, 1e-300));
        }
    }
    EXPECT_LE(worst, 1e-5);
}

TEST(EnergyValue, DilationDoesNotIncrease) {
    std::mt19937_64 rng(43);
    const Domain d(0.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto rho = random_density(rng, Domain(4.0, 6.0), 4 + trial % 30);
        const double center = 5.0;
        for (double s : {1.1, 1.5, 2.0, 4.0}) {
            std::vector<double> y = rho.position_vector();
            for (double& v : y) {
                v = center + s * (v - center);
            }
            const ParticleDensity wide(d, y);
            const ParticleDensity narrow(d, rho.position_vector());
            for (const auto& e : {InternalEnergy::entropy(), InternalEnergy::power_law(2.0)}) {
                EXPECT_LE(energy_value(e, wide), energy_value(e, narrow) + 1e-12);
            }
        }
    }
}

TEST(EnergyValue, CollisionsAreFlooredAndCounted) {
    const Domain d(0.0, 1.0);
    const ParticleDensity rho(d, {0.1, 0.4, 0.4, 0.8});
    const auto e = InternalEnergy::entropy();
    EXPECT_TRUE(std::isfinite(energy_value(e, rho)));
    EXPECT_EQ(collision_count(e, rho), 1u);
    EXPECT_EQ(collision_count(e, ParticleDensity::uniform(d, 5)), 0u);
}

TEST(McCann, ClosedFormCases) {
    EXPECT_TRUE(mccann_check(InternalEnergy::entropy()).satisfied);
    EXPECT_TRUE(mccann_check(InternalEnergy::power_law(2.0)).satisfied);
    EXPECT_TRUE(mccann_check(InternalEnergy::power_law(1.2)).satisfied);
    const auto concave = InternalEnergy::custom("negative_square", [](double x) { return -x * x; },
                                                [](double x) { return -2.0 * x; }, [](double) { return -2.0; });
    const auto report = mccann_check(concave);
    EXPECT_FALSE(report.satisfied);
    ASSERT_TRUE(report.first_violation.has_value());
    EXPECT_GT(*report.first_violation, 0.0);
    EXPECT_THROW(mccann_check(InternalEnergy::entropy(), 1, 2), InvalidInput);
}

TEST(McCann, PowerLawInHigherDimension) {
    // r^n F(r^-n) = r^{n(1-m)} is convex nonincreasing for any m > 1.
    EXPECT_TRUE(mccann_check(InternalEnergy::power_law(2.0), 3).satisfied);
}

}  // namespace
