#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mmflow {

// Closed interval [lower, upper] hosting every population.
struct Domain {
    double lower = 0.0;
    double upper = 1.0;

    Domain() = default;
    Domain(double lower, double upper);

    double length() const noexcept { return upper - lower; }
    bool contains(double x) const noexcept { return x >= lower && x <= upper; }
    // Minimum gap used wherever a density 1/(N*gap) is reconstructed.
    double spacing_floor() const noexcept { return 1e-12 * length(); }

    friend bool operator==(const Domain&, const Domain&) = default;
};

/**
 * Probability measure on a Domain stored as N equal-mass atoms.
 *
 * positions[j] is the quantile of the underlying density at (j + 1/2) / N,
 * so the list is sorted and each atom carries mass 1/N. Ties are allowed.
 */
class ParticleDensity {
public:
    ParticleDensity(Domain domain, std::vector<double> positions);

    // N atoms at the midpoint quantiles of the uniform density on the domain.
    static ParticleDensity uniform(Domain domain, std::size_t n);

    const Domain& domain() const noexcept { return domain_; }
    std::span<const double> positions() const noexcept { return positions_; }
    const std::vector<double>& position_vector() const noexcept { return positions_; }
    std::size_t size() const noexcept { return positions_.size(); }
    double operator[](std::size_t j) const { return positions_[j]; }

    friend bool operator==(const ParticleDensity&, const ParticleDensity&) = default;

private:
    Domain domain_;
    std::vector<double> positions_;
};

// Piecewise-constant density on M cells; values are probability per unit length.
class GridDensity {
public:
    // Throws InvalidInput unless edges increase strictly, lie in the domain,
    // values are nonnegative and the total mass is 1 within 1e-12.
    GridDensity(Domain domain, std::vector<double> cell_edges, std::vector<double> cell_values);

    // Rescales values to unit mass; throws InvalidInput on zero mass.
    static GridDensity from_unnormalized(Domain domain, std::vector<double> cell_edges,
                                         std::vector<double> cell_values);

    const Domain& domain() const noexcept { return domain_; }
    std::span<const double> edges() const noexcept { return edges_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t cells() const noexcept { return values_.size(); }
    double width(std::size_t cell) const { return edges_[cell + 1] - edges_[cell]; }
    double mass() const noexcept;
    // Density at x; points on an interior edge belong to the right-hand cell.
    double value_at(double x) const;

    friend bool operator==(const GridDensity&, const GridDensity&) = default;

private:
    Domain domain_;
    std::vector<double> edges_;
    std::vector<double> values_;
};

// Left-continuous generalized inverse inf{a : G(a) >= u} of the particle CDF.
// quantile(rho, 0) returns the first atom. Throws DomainError for u outside [0, 1].
double quantile(const ParticleDensity& rho, double u);

// Exact CDF inversion of a grid density at the midpoint levels (j + 1/2) / n.
ParticleDensity from_grid(const GridDensity& rho, std::size_t n_particles);

// Histogram of particle mass over the given cells. The edges must bracket all
// particles and lie inside the domain; a particle on an interior edge counts
// toward the right-hand cell, one on the last edge toward the last cell.
GridDensity to_grid(const ParticleDensity& rho, std::span<const double> cell_edges);

// Density 1/((N-1) * gap) between consecutive particles, zero outside the
// particle span. This is the reconstruction the discrete energies use,
// renormalized to unit mass. Requires N >= 2.
GridDensity gap_reconstruction(const ParticleDensity& rho);

// L1 distance between a grid density and a reference density function on the
// grid's domain, by composite Gauss-Legendre quadrature on every cell.
double l1_distance(const GridDensity& rho, const std::function<double(double)>& reference,
                   int subintervals_per_cell = 4);

// Quadratic Wasserstein distance; with equal-mass sorted atoms this is the
// L2 distance of the quantile functions. Throws InvalidInput on mismatched N.
double w2_distance(const ParticleDensity& rho, const ParticleDensity& mu);
double w2_distance_squared(const ParticleDensity& rho, const ParticleDensity& mu);

// Product distance (sum_i W2^2(rho_i, mu_i))^(1/2).
double product_w2(std::span<const ParticleDensity> rhos, std::span<const ParticleDensity> mus);

}  // namespace mmflow
