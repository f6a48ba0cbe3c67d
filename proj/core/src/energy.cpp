#include "mmflow/energy.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "mmflow/errors.hpp"

namespace mmflow {

InternalEnergy::InternalEnergy(EnergyKind kind, double exponent, std::string name)
    : kind_(kind), exponent_(exponent), name_(std::move(name)) {}

InternalEnergy InternalEnergy::entropy() { return InternalEnergy(EnergyKind::entropy, 0.0, "entropy"); }

InternalEnergy InternalEnergy::power_law(double exponent) {
    if (!(exponent > 1.0) || !std::isfinite(exponent)) {
        throw InvalidInput("power_law exponent must be > 1, got " + std::to_string(exponent));
    }
    return InternalEnergy(EnergyKind::power_law, exponent, "power_law");
}

InternalEnergy InternalEnergy::zero() { return InternalEnergy(EnergyKind::zero, 0.0, "zero"); }

InternalEnergy InternalEnergy::custom(std::string name, Scalar f, Scalar df, Scalar d2f) {
    if (!f || !df || !d2f) {
        throw InvalidInput("custom energy needs F, F' and F''");
    }
    if (std::abs(f(0.0)) > 1e-14) {
        throw InvalidInput("custom energy '" + name + "' violates F(0) = 0");
    }
    InternalEnergy e(EnergyKind::custom, 0.0, std::move(name));
    e.f_ = std::move(f);
    e.df_ = std::move(df);
    e.d2f_ = std::move(d2f);
    return e;
}

InternalEnergy InternalEnergy::with_gap_floor_factor(double factor) const {
    if (!(factor > 0.0)) {
        throw InvalidInput("gap floor factor must be positive");
    }
    InternalEnergy copy = *this;
    copy.gap_floor_factor_ = factor;
    return copy;
}

double InternalEnergy::value(double x) const {
    switch (kind_) {
        case EnergyKind::entropy: return x > 0.0 ? x * std::log(x) : 0.0;
        case EnergyKind::power_law: return std::pow(x, exponent_);
        case EnergyKind::zero: return 0.0;
        case EnergyKind::custom: return f_(x);
    }
    return 0.0;
}

double InternalEnergy::derivative(double x) const {
    switch (kind_) {
        case EnergyKind::entropy:
            return x > 0.0 ? std::log(x) + 1.0 : -std::numeric_limits<double>::infinity();
        case EnergyKind::power_law: return exponent_ * std::pow(x, exponent_ - 1.0);
        case EnergyKind::zero: return 0.0;
        case EnergyKind::custom: return df_(x);
    }
    return 0.0;
}

double InternalEnergy::second_derivative(double x) const {
    switch (kind_) {
        case EnergyKind::entropy: return x > 0.0 ? 1.0 / x : std::numeric_limits<double>::infinity();
        case EnergyKind::power_law: return exponent_ * (exponent_ - 1.0) * std::pow(x, exponent_ - 2.0);
        case EnergyKind::zero: return 0.0;
        case EnergyKind::custom: return d2f_(x);
    }
    return 0.0;
}

bool operator==(const InternalEnergy& a, const InternalEnergy& b) {
    return a.kind_ == b.kind_ && a.exponent_ == b.exponent_ && a.name_ == b.name_ &&
           a.gap_floor_factor_ == b.gap_floor_factor_;
}

double pressure(const InternalEnergy& e, double x) {
    if (!(x >= 0.0)) {
        throw DomainError("pressure needs x >= 0, got " + std::to_string(x));
    }
    switch (e.kind()) {
        case EnergyKind::entropy: return x;
        case EnergyKind::power_law: return (e.exponent() - 1.0) * std::pow(x, e.exponent());
        case EnergyKind::zero: return 0.0;
        case EnergyKind::custom: return x == 0.0 ? -e.value(0.0) : x * e.derivative(x) - e.value(x);
    }
    return 0.0;
}

namespace particles {

namespace {

// Energy carried by one gap of width `gap` among n particles.
double gap_energy(const InternalEnergy& e, double gap, double n) {
    switch (e.kind()) {
        case EnergyKind::entropy: return -std::log(n * gap) / n;
        case EnergyKind::power_law: return gap * std::pow(n * gap, -e.exponent());
        case EnergyKind::zero: return 0.0;
        case EnergyKind::custom: return gap * e.value(1.0 / (n * gap));
    }
    return 0.0;
}

double gap_energy_delta(const InternalEnergy& e, double from, double to, double n) {
    if (from == to) {
        return 0.0;
    }
    switch (e.kind()) {
        case EnergyKind::entropy: return -std::log1p((to - from) / from) / n;
        case EnergyKind::power_law:
            return gap_energy(e, from, n) * std::expm1((1.0 - e.exponent()) * std::log1p((to - from) / from));
        case EnergyKind::zero: return 0.0;
        case EnergyKind::custom: return gap_energy(e, to, n) - gap_energy(e, from, n);
    }
    return 0.0;
}

}  // namespace

double energy(const InternalEnergy& e, std::span<const double> x, double floor) {
    if (e.kind() == EnergyKind::zero) {
        return 0.0;
    }
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        sum += gap_energy(e, std::max(x[j + 1] - x[j], floor), n);
    }
    return sum;
}

void energy_gradient(const InternalEnergy& e, std::span<const double> x, double floor, std::span<double> out) {
    assert(out.size() == x.size());
    std::fill(out.begin(), out.end(), 0.0);
    if (e.kind() == EnergyKind::zero) {
        return;
    }
    const double n = static_cast<double>(x.size());
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        const double gap = x[j + 1] - x[j];
        if (gap <= floor) {
            continue;  // flat below the floor
        }
        const double p = pressure(e, 1.0 / (n * gap));
        out[j] += p;
        out[j + 1] -= p;
    }
}

double energy_delta(const InternalEnergy& e, std::span<const double> x, std::span<const double> y, double floor) {
    assert(x.size() == y.size());
    if (e.kind() == EnergyKind::zero) {
        return 0.0;
    }
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        sum += gap_energy_delta(e, std::max(x[j + 1] - x[j], floor), std::max(y[j + 1] - y[j], floor), n);
    }
    return sum;
}

}  // namespace particles

namespace {

void require_gaps(const InternalEnergy& e, const ParticleDensity& rho) {
    if (e.kind() == EnergyKind::zero) {
        return;
    }
    if (rho.size() < 2) {
        throw InvalidInput("discrete energy needs at least two particles");
    }
    if (!(rho.positions().back() > rho.positions().front())) {
        throw InvalidInput("discrete energy of a fully coincident particle set is degenerate");
    }
}

}  // namespace

double energy_value(const InternalEnergy& e, const ParticleDensity& rho) {
    require_gaps(e, rho);
    return particles::energy(e, rho.positions(), e.gap_floor_factor() * rho.domain().length());
}

std::vector<double> energy_gradient(const InternalEnergy& e, const ParticleDensity& rho) {
    require_gaps(e, rho);
    std::vector<double> g(rho.size(), 0.0);
    particles::energy_gradient(e, rho.positions(), e.gap_floor_factor() * rho.domain().length(), g);
    return g;
}

std::size_t collision_count(const InternalEnergy& e, const ParticleDensity& rho) {
    const double floor = e.gap_floor_factor() * rho.domain().length();
    std::size_t count = 0;
    for (std::size_t j = 0; j + 1 < rho.size(); ++j) {
        if (rho[j + 1] - rho[j] <= floor) {
            ++count;
        }
    }
    return count;
}

McCannReport mccann_check(const InternalEnergy& e, std::size_t n_dim, std::size_t samples) {
    if (samples < 3) {
        throw InvalidInput("mccann_check needs at least 3 samples");
    }
    if (e.kind() == EnergyKind::zero) {
        return {};
    }
    const double n = static_cast<double>(n_dim);
    const double log_lo = std::log(1e-4);
    const double log_hi = std::log(1e4);
    std::vector<double> r(samples);
    std::vector<double> phi(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        r[k] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(k) / static_cast<double>(samples - 1));
        phi[k] = std::pow(r[k], n) * e.value(std::pow(r[k], -n));
    }
    constexpr double tol = 1e-10;
    for (std::size_t k = 0; k + 1 < samples; ++k) {
        const double scale = std::max({1.0, std::abs(phi[k]), std::abs(phi[k + 1])});
        if (phi[k + 1] - phi[k] > tol * scale) {
            return {false, r[k + 1], "r^n F(r^-n) increases"};
        }
    }
    for (std::size_t k = 1; k + 1 < samples; ++k) {
        const double left = (phi[k] - phi[k - 1]) / (r[k] - r[k - 1]);
        const double right = (phi[k + 1] - phi[k]) / (r[k + 1] - r[k]);
        const double scale = std::max({1.0, std::abs(left), std::abs(right)});
        if (right - left < -tol * scale) {
            return {false, r[k], "r^n F(r^-n) is not convex"};
        }
    }
    return {};
}

double pressure_bound_constant(const InternalEnergy& e, double x_max, std::size_t samples) {
    double c = 0.0;
    auto probe = [&](double x) {
        const double denom = 1.0 + e.value(x);
        const double p = pressure(e, x);
        if (denom <= 0.0) {
            if (p > 0.0) {
                c = std::numeric_limits<double>::infinity();
            }
            return;
        }
        c = std::max(c, p / denom);
    };
    probe(0.0);
    const double log_lo = std::log(1e-8);
    const double log_hi = std::log(x_max);
    for (std::size_t k = 0; k < samples; ++k) {
        probe(std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(k) / static_cast<double>(samples - 1)));
    }
    for (std::size_t k = 0; k <= samples; ++k) {
        probe(x_max * static_cast<double>(k) / static_cast<double>(samples));
    }
    return c;
}

}  // namespace mmflow
