#include "mmflow/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mmflow/errors.hpp"

namespace mmflow {

namespace {

constexpr double kMassTolerance = 1e-12;

// Tolerance for positions that land a hair outside the domain by rounding.
double boundary_slack(const Domain& d) { return 1e-12 * d.length(); }

}  // namespace

Domain::Domain(double lo, double hi) : lower(lo), upper(hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw InvalidInput("domain requires finite lower < upper, got [" + std::to_string(lo) +
                           ", " + std::to_string(hi) + "]");
    }
}

ParticleDensity::ParticleDensity(Domain domain, std::vector<double> positions)
    : domain_(domain), positions_(std::move(positions)) {
    if (positions_.empty()) {
        throw InvalidInput("particle density needs at least one particle");
    }
    for (std::size_t j = 0; j < positions_.size(); ++j) {
        const double x = positions_[j];
        if (!std::isfinite(x)) {
            throw InvalidInput("particle " + std::to_string(j) + " is not finite");
        }
        if (!domain_.contains(x)) {
            throw InvalidInput("particle " + std::to_string(j) + " at " + std::to_string(x) +
                               " lies outside the domain");
        }
        if (j > 0 && x < positions_[j - 1]) {
            throw InvalidInput("particle positions must be nondecreasing (index " +
                               std::to_string(j) + ")");
        }
    }
}

ParticleDensity ParticleDensity::uniform(Domain domain, std::size_t n) {
    if (n == 0) {
        throw InvalidInput("particle count must be positive");
    }
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) {
        x[j] = domain.lower + domain.length() * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    }
    return ParticleDensity(domain, std::move(x));
}

GridDensity::GridDensity(Domain domain, std::vector<double> cell_edges, std::vector<double> cell_values)
    : domain_(domain), edges_(std::move(cell_edges)), values_(std::move(cell_values)) {
    if (values_.empty() || edges_.size() != values_.size() + 1) {
        throw InvalidInput("grid density needs M >= 1 cells and M + 1 edges");
    }
    const double slack = boundary_slack(domain_);
    if (edges_.front() < domain_.lower - slack || edges_.back() > domain_.upper + slack) {
        throw InvalidInput("grid edges extend outside the domain");
    }
    edges_.front() = std::max(edges_.front(), domain_.lower);
    edges_.back() = std::min(edges_.back(), domain_.upper);
    for (std::size_t c = 0; c < values_.size(); ++c) {
        if (!(edges_[c + 1] > edges_[c])) {
            throw InvalidInput("grid edges must increase strictly (cell " + std::to_string(c) + ")");
        }
        if (!std::isfinite(values_[c]) || values_[c] < 0.0) {
            throw InvalidInput("grid value " + std::to_string(c) + " must be finite and nonnegative");
        }
    }
    const double m = mass();
    if (m <= 0.0) {
        throw InvalidInput("grid density has zero mass");
    }
    if (std::abs(m - 1.0) > kMassTolerance) {
        throw InvalidInput("grid density mass " + std::to_string(m) + " differs from 1");
    }
}

GridDensity GridDensity::from_unnormalized(Domain domain, std::vector<double> cell_edges,
                                           std::vector<double> cell_values) {
    if (cell_values.empty() || cell_edges.size() != cell_values.size() + 1) {
        throw InvalidInput("grid density needs M >= 1 cells and M + 1 edges");
    }
    double m = 0.0;
    for (std::size_t c = 0; c < cell_values.size(); ++c) {
        m += cell_values[c] * (cell_edges[c + 1] - cell_edges[c]);
    }
    if (!(m > 0.0) || !std::isfinite(m)) {
        throw InvalidInput("grid density has zero mass");
    }
    for (double& v : cell_values) {
        v /= m;
    }
    return GridDensity(domain, std::move(cell_edges), std::move(cell_values));
}

double GridDensity::mass() const noexcept {
    double m = 0.0;
    for (std::size_t c = 0; c < values_.size(); ++c) {
        m += values_[c] * (edges_[c + 1] - edges_[c]);
    }
    return m;
}

double GridDensity::value_at(double x) const {
    if (x < edges_.front() || x > edges_.back()) {
        return 0.0;
    }
    auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
    std::size_t cell = static_cast<std::size_t>(it - edges_.begin());
    cell = std::min(cell == 0 ? 0 : cell - 1, values_.size() - 1);
    return values_[cell];
}

double quantile(const ParticleDensity& rho, double u) {
    if (!(u >= 0.0 && u <= 1.0)) {
        throw DomainError("quantile level must lie in [0, 1], got " + std::to_string(u));
    }
    const std::size_t n = rho.size();
    const double s = u * static_cast<double>(n);
    // Atom k (1-based) covers levels ((k-1)/N, k/N]; absorb rounding just above k/N.
    const double eps = std::numeric_limits<double>::epsilon();
    double k = std::ceil(s - 8.0 * eps * std::max(1.0, s));
    k = std::clamp(k, 1.0, static_cast<double>(n));
    return rho[static_cast<std::size_t>(k) - 1];
}

ParticleDensity from_grid(const GridDensity& rho, std::size_t n_particles) {
    if (n_particles == 0) {
        throw InvalidInput("particle count must be positive");
    }
    const auto edges = rho.edges();
    const auto values = rho.values();
    const std::size_t m = values.size();
    std::vector<double> cumulative(m + 1, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        cumulative[c + 1] = cumulative[c] + values[c] * rho.width(c);
    }
    if (!(cumulative[m] > 0.0)) {
        throw InvalidInput("grid density has zero mass");
    }
    std::vector<double> x(n_particles);
    std::size_t cell = 0;
    for (std::size_t j = 0; j < n_particles; ++j) {
        const double level = cumulative[m] * (static_cast<double>(j) + 0.5) / static_cast<double>(n_particles);
        while (cell + 1 < m && (cumulative[cell + 1] < level || values[cell] == 0.0)) {
            ++cell;
        }
        double pos = edges[cell + 1];
        if (values[cell] > 0.0) {
            pos = edges[cell] + (level - cumulative[cell]) / values[cell];
        }
        x[j] = std::clamp(pos, edges[cell], edges[cell + 1]);
        if (j > 0) {
            x[j] = std::max(x[j], x[j - 1]);
        }
    }
    return ParticleDensity(rho.domain(), std::move(x));
}

GridDensity to_grid(const ParticleDensity& rho, std::span<const double> cell_edges) {
    if (cell_edges.size() < 2) {
        throw InvalidInput("to_grid needs at least two edges");
    }
    if (cell_edges.front() > rho.positions().front() || cell_edges.back() < rho.positions().back()) {
        throw InvalidInput("cell edges do not cover the particles");
    }
    const std::size_t m = cell_edges.size() - 1;
    std::vector<double> counts(m, 0.0);
    for (double x : rho.positions()) {
        auto it = std::upper_bound(cell_edges.begin(), cell_edges.end(), x);
        std::size_t cell = static_cast<std::size_t>(it - cell_edges.begin());
        cell = std::min(cell == 0 ? 0 : cell - 1, m - 1);
        counts[cell] += 1.0;
    }
    const double n = static_cast<double>(rho.size());
    std::vector<double> values(m);
    for (std::size_t c = 0; c < m; ++c) {
        values[c] = counts[c] / (n * (cell_edges[c + 1] - cell_edges[c]));
    }
    return GridDensity(rho.domain(), std::vector<double>(cell_edges.begin(), cell_edges.end()),
                       std::move(values));
}

GridDensity gap_reconstruction(const ParticleDensity& rho) {
    const std::size_t n = rho.size();
    if (n < 2) {
        throw InvalidInput("gap reconstruction needs at least two particles");
    }
    const Domain& d = rho.domain();
    const auto x = rho.positions();
    if (!(x.back() > x.front())) {
        throw InvalidInput("gap reconstruction of coincident particles is undefined");
    }
    const double gap_mass = 1.0 / static_cast<double>(n - 1);

    std::vector<double> edges;
    std::vector<double> masses;
    if (x.front() > d.lower) {
        edges.push_back(d.lower);
        masses.push_back(0.0);
    }
    edges.push_back(x.front());
    double pending = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        pending += gap_mass;
        // Coincident particles hand their gap mass to the next open gap.
        if (x[j + 1] > edges.back()) {
            edges.push_back(x[j + 1]);
            masses.push_back(pending);
            pending = 0.0;
        }
    }
    if (pending > 0.0) {
        masses.back() += pending;
    }
    if (x.back() < d.upper) {
        edges.push_back(d.upper);
        masses.push_back(0.0);
    }
    std::vector<double> values(masses.size());
    for (std::size_t c = 0; c < masses.size(); ++c) {
        values[c] = masses[c] / (edges[c + 1] - edges[c]);
    }
    return GridDensity::from_unnormalized(d, std::move(edges), std::move(values));
}

double l1_distance(const GridDensity& rho, const std::function<double(double)>& reference,
                   int subintervals_per_cell) {
    // 5-point Gauss-Legendre on [-1, 1].
    static constexpr std::array<double, 5> nodes = {0.0, -0.5384693101056831, 0.5384693101056831,
                                                    -0.9061798459386640, 0.9061798459386640};
    static constexpr std::array<double, 5> weights = {0.5688888888888889, 0.4786286704993665,
                                                      0.4786286704993665, 0.2369268850561891,
                                                      0.2369268850561891};
    const int sub = std::max(1, subintervals_per_cell);
    const auto edges = rho.edges();
    const auto values = rho.values();
    double total = 0.0;
    auto integrate = [&](double a, double b, double value) {
        const double w = (b - a) / sub;
        for (int s = 0; s < sub; ++s) {
            const double lo = a + s * w;
            const double mid = lo + 0.5 * w;
            for (std::size_t q = 0; q < nodes.size(); ++q) {
                const double xq = mid + 0.5 * w * nodes[q];
                total += 0.5 * w * weights[q] * std::abs(value - reference(xq));
            }
        }
    };
    const Domain& d = rho.domain();
    if (edges.front() > d.lower) {
        integrate(d.lower, edges.front(), 0.0);
    }
    for (std::size_t c = 0; c < values.size(); ++c) {
        integrate(edges[c], edges[c + 1], values[c]);
    }
    if (edges.back() < d.upper) {
        integrate(edges.back(), d.upper, 0.0);
    }
    return total;
}

double w2_distance_squared(const ParticleDensity& rho, const ParticleDensity& mu) {
    if (rho.size() != mu.size()) {
        throw InvalidInput("w2_distance needs equal particle counts, got " + std::to_string(rho.size()) +
                           " and " + std::to_string(mu.size()));
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < rho.size(); ++j) {
        const double d = rho[j] - mu[j];
        sum += d * d;
    }
    return sum / static_cast<double>(rho.size());
}

double w2_distance(const ParticleDensity& rho, const ParticleDensity& mu) {
    return std::sqrt(w2_distance_squared(rho, mu));
}

double product_w2(std::span<const ParticleDensity> rhos, std::span<const ParticleDensity> mus) {
    if (rhos.size() != mus.size()) {
        throw InvalidInput("product_w2 needs tuples of equal length");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        sum += w2_distance_squared(rhos[i], mus[i]);
    }
    return std::sqrt(sum);
}

}  // namespace mmflow
