#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmflow/geometry.hpp"

namespace mmflow {

enum class EnergyKind { entropy, power_law, zero, custom };

/**
 * Congestion integrand F : [0, inf) -> R with F(0) = 0.
 *
 * entropy is F(x) = x log x, power_law is F(x) = x^m with m > 1, zero is the
 * test-only F = 0 and custom wraps user callables for F, F' and F''.
 *
 * On particles the energy is sum_j gap_j F(1/(N gap_j)) over the N-1
 * interior gaps, with gaps floored at gap_floor_factor * domain length.
 */
class InternalEnergy {
public:
    using Scalar = std::function<double(double)>;

    static InternalEnergy entropy();
    static InternalEnergy power_law(double exponent);
    static InternalEnergy zero();
    // F(0) must vanish; checked at the origin on construction.
    static InternalEnergy custom(std::string name, Scalar f, Scalar df, Scalar d2f);

    EnergyKind kind() const noexcept { return kind_; }
    double exponent() const noexcept { return exponent_; }
    const std::string& name() const noexcept { return name_; }
    double gap_floor_factor() const noexcept { return gap_floor_factor_; }
    InternalEnergy with_gap_floor_factor(double factor) const;

    double value(double x) const;              // F(x)
    double derivative(double x) const;         // F'(x)
    double second_derivative(double x) const;  // F''(x)

    // Same parameters; custom energies compare by name.
    friend bool operator==(const InternalEnergy& a, const InternalEnergy& b);

private:
    InternalEnergy(EnergyKind kind, double exponent, std::string name);

    EnergyKind kind_;
    double exponent_ = 0.0;
    std::string name_;
    double gap_floor_factor_ = 1e-12;
    Scalar f_, df_, d2f_;
};

// P(x) = x F'(x) - F(x). Throws DomainError for negative x.
double pressure(const InternalEnergy& e, double x);

// Discrete energy of a particle density. zero kind returns 0 for any N; the
// other kinds need N >= 2 and at least two distinct positions (InvalidInput).
double energy_value(const InternalEnergy& e, const ParticleDensity& rho);

// Exact gradient of energy_value in the particle positions. Component j is
// P(rho_j) - P(rho_{j-1}), the pressure jump across particle j.
std::vector<double> energy_gradient(const InternalEnergy& e, const ParticleDensity& rho);

// Number of gaps at or below the spacing floor (collision diagnostic).
std::size_t collision_count(const InternalEnergy& e, const ParticleDensity& rho);

// Raw-array forms used on the solver hot path. `floor` is the absolute gap
// floor; positions must be sorted. No validation beyond debug asserts.
namespace particles {

double energy(const InternalEnergy& e, std::span<const double> x, double floor);
void energy_gradient(const InternalEnergy& e, std::span<const double> x, double floor,
                     std::span<double> out);
// energy(y) - energy(x), evaluated gap by gap without cancellation for the
// built-in kinds.
double energy_delta(const InternalEnergy& e, std::span<const double> x, std::span<const double> y,
                    double floor);

}  // namespace particles

struct McCannReport {
    bool satisfied = true;
    // First sample r at which convexity or monotonicity fails.
    std::optional<double> first_violation;
    std::string reason;

    explicit operator bool() const noexcept { return satisfied; }
};

// Numerical check that r -> r^n F(r^-n) is convex and nonincreasing on a
// log-spaced sample of r in [1e-4, 1e4]. Requires samples >= 3.
McCannReport mccann_check(const InternalEnergy& e, std::size_t n_dim = 1, std::size_t samples = 400);

// Smallest C with P(x) <= C (1 + F(x)) over x sampled in [0, x_max].
double pressure_bound_constant(const InternalEnergy& e, double x_max = 1e6, std::size_t samples = 2000);

}  // namespace mmflow
