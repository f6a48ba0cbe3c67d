#include "mmflow/jko.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "mmflow/errors.hpp"

namespace mmflow {

namespace {

constexpr double kArmijo = 1e-4;
constexpr std::size_t kMemory = 10;
constexpr int kMaxBacktracks = 80;

// Hot-path evaluation of the scaled objective (N/2) J and its gradient.
class StepEvaluator {
public:
    explicit StepEvaluator(const StepProblem& p)
        : p_(p), n_(p.size()), floor_(p.energy.gap_floor_factor() * p.domain().length()), point_(p.frozen.size()) {}

    std::span<const double> anchor() const { return p_.previous().positions(); }

    // Coupling tuple of particle j with candidate value v in slot i.
    std::span<const double> tuple(std::size_t j, double v) {
        for (std::size_t k = 0; k < point_.size(); ++k) {
            point_[k] = k == p_.i ? v : p_.frozen[k][j];
        }
        return point_;
    }

    double value(std::span<const double> x) {
        const auto a = anchor();
        const double n = static_cast<double>(n_);
        double w2 = 0.0;
        double interaction = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            w2 += (x[j] - a[j]) * (x[j] - a[j]);
            if (!p_.cost.is_zero()) {
                interaction += p_.cost.evaluate(tuple(j, x[j]));
            }
        }
        return w2 / n + 2.0 * p_.h * (particles::energy(p_.energy, x, floor_) + interaction / n);
    }

    // g_j = (x_j - a_j) + h (N dE/dx_j + dc/dx_i).
    void scaled_gradient(std::span<const double> x, std::vector<double>& g) {
        g.resize(n_);
        particles::energy_gradient(p_.energy, x, floor_, g);
        const auto a = anchor();
        const double n = static_cast<double>(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            double force = n * g[j];
            if (!p_.cost.is_zero()) {
                force += p_.cost.partial(p_.i, tuple(j, x[j]));
            }
            g[j] = (x[j] - a[j]) + p_.h * force;
        }
    }

    // (N/2) (J(y) - J(x)).
    double scaled_delta(std::span<const double> x, std::span<const double> y) {
        const auto a = anchor();
        const double n = static_cast<double>(n_);
        double w2 = 0.0;
        double interaction = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            w2 += (y[j] - x[j]) * (y[j] + x[j] - 2.0 * a[j]);
            if (!p_.cost.is_zero() && y[j] != x[j]) {
                interaction += p_.cost.delta(p_.i, tuple(j, x[j]), y[j]);
            }
        }
        return 0.5 * w2 + p_.h * (n * particles::energy_delta(p_.energy, x, y, floor_) + interaction);
    }

    std::size_t size() const { return n_; }
    double floor() const { return floor_; }

private:
    const StepProblem& p_;
    std::size_t n_;
    double floor_;
    std::vector<double> point_;
};

void require_candidate(const StepProblem& p, std::span<const double> x) {
    if (x.size() != p.size()) {
        throw InvalidInput("candidate has " + std::to_string(x.size()) + " particles, expected " +
                           std::to_string(p.size()));
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!p.domain().contains(x[j])) {
            throw InvalidInput("candidate particle " + std::to_string(j) + " lies outside the domain");
        }
        if (j > 0 && x[j] < x[j - 1]) {
            throw InvalidInput("candidate positions must be sorted");
        }
    }
}

double stationarity(std::span<const double> x, std::span<const double> g, double lower, double upper,
                    std::vector<double>& work) {
    work.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        work[j] = x[j] - g[j];
    }
    const auto proj = project_ordered_box(work, lower, upper);
    double r = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        r = std::max(r, std::abs(x[j] - proj[j]));
    }
    return r;
}

}  // namespace

StepProblem::StepProblem(std::vector<ParticleDensity> frozen_tuple, std::size_t index, InternalEnergy e,
                         CostFunction c, double step)
    : frozen(std::move(frozen_tuple)), i(index), energy(std::move(e)), cost(std::move(c)), h(step) {
    if (frozen.size() != cost.arity()) {
        throw InvalidInput("frozen tuple has " + std::to_string(frozen.size()) + " densities but the cost has arity " +
                           std::to_string(cost.arity()));
    }
    if (i >= frozen.size()) {
        throw InvalidInput("population index " + std::to_string(i) + " out of range");
    }
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw InvalidInput("time step h must be positive");
    }
    for (const auto& rho : frozen) {
        if (rho.size() != frozen[i].size() || !(rho.domain() == frozen[i].domain())) {
            throw InvalidInput("frozen densities must share N and domain");
        }
    }
    if (!(cost.domain() == frozen[i].domain())) {
        throw InvalidInput("cost domain differs from the density domain");
    }
    if (energy.kind() != EnergyKind::zero && frozen[i].size() < 2) {
        throw InvalidInput("a non-zero internal energy needs N >= 2");
    }
}

double default_tolerance(std::size_t n) { return 1e-9 * std::sqrt(static_cast<double>(n)); }

double objective(const StepProblem& p, std::span<const double> x) {
    require_candidate(p, x);
    StepEvaluator ev(p);
    return ev.value(x);
}

std::vector<double> objective_gradient(const StepProblem& p, std::span<const double> x) {
    require_candidate(p, x);
    StepEvaluator ev(p);
    std::vector<double> g;
    ev.scaled_gradient(x, g);
    const double scale = 2.0 / static_cast<double>(p.size());
    for (double& v : g) {
        v *= scale;
    }
    return g;
}

double objective_delta(const StepProblem& p, std::span<const double> x, std::span<const double> y) {
    require_candidate(p, x);
    require_candidate(p, y);
    StepEvaluator ev(p);
    return ev.scaled_delta(x, y) * 2.0 / static_cast<double>(p.size());
}

std::vector<double> project_ordered_box(std::span<const double> y, double lower, double upper) {
    // Blocks of pooled entries: running mean and count.
    std::vector<double> mean;
    std::vector<std::size_t> count;
    mean.reserve(y.size());
    count.reserve(y.size());
    for (double v : y) {
        mean.push_back(v);
        count.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
            const std::size_t c1 = count[count.size() - 2], c2 = count.back();
            const double merged = (mean[mean.size() - 2] * static_cast<double>(c1) + mean.back() * static_cast<double>(c2)) /
                                  static_cast<double>(c1 + c2);
            mean.pop_back();
            count.pop_back();
            mean.back() = merged;
            count.back() = c1 + c2;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (std::size_t b = 0; b < mean.size(); ++b) {
        const double v = std::clamp(mean[b], lower, upper);
        out.insert(out.end(), count[b], v);
    }
    return out;
}

StepSolution solve_step(const StepProblem& p, const SolverOptions& options, std::optional<std::span<const double>> initial) {
    const double tol = options.tol > 0.0 ? options.tol : default_tolerance(p.size());
    const double lower = p.domain().lower;
    const double upper = p.domain().upper;
    const auto previous = p.previous().positions();
    StepEvaluator ev(p);

    std::vector<double> x;
    if (initial) {
        if (initial->size() != p.size()) {
            throw InvalidInput("initial guess has the wrong particle count");
        }
        x = project_ordered_box(*initial, lower, upper);
    } else {
        x.assign(previous.begin(), previous.end());
    }
    // Objective values are tracked relative to the previous state.
    double f = initial ? ev.scaled_delta(previous, x) : 0.0;
    std::deque<double> history{f};

    std::vector<double> g, g_new, y, work;
    ev.scaled_gradient(x, g);
    double residual = stationarity(x, g, lower, upper, work);
    double alpha = 1.0;
    std::size_t iterations = 0;

    while (residual > tol) {
        if (iterations >= options.max_iterations) {
            throw NumericalFailure("JKO step hit the iteration cap of " + std::to_string(options.max_iterations),
                                   residual);
        }
        const double reference = *std::max_element(history.begin(), history.end());
        bool accepted = false;
        double d = 0.0;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            work.resize(x.size());
            for (std::size_t j = 0; j < x.size(); ++j) {
                work[j] = x[j] - alpha * g[j];
            }
            y = project_ordered_box(work, lower, upper);
            double slope = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                slope += g[j] * (y[j] - x[j]);
            }
            d = ev.scaled_delta(x, y);
            if (f + d <= reference + kArmijo * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            throw NumericalFailure("JKO step line search stalled", residual);
        }
        ev.scaled_gradient(y, g_new);
        double ss = 0.0, sy = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double s = y[j] - x[j];
            ss += s * s;
            sy += s * (g_new[j] - g[j]);
        }
        alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : 1.0;
        x.swap(y);
        g.swap(g_new);
        f += d;
        history.push_back(f);
        if (history.size() > kMemory) {
            history.pop_front();
        }
        residual = stationarity(x, g, lower, upper, work);
        ++iterations;
    }

    std::vector<ParticleDensity> tuple = p.frozen;
    tuple[p.i] = ParticleDensity(p.domain(), x);
    const double n = static_cast<double>(p.size());
    StepSolution s{
        .minimizer = tuple[p.i],
        .objective_value = ev.value(x),
        .objective_at_previous = ev.value(previous),
        .objective_change = 2.0 * f / n,
        .w2_to_previous = w2_distance(tuple[p.i], p.previous()),
        .plan = monotone_plan(tuple, p.cost),
        .first_order_residual = residual,
        .iterations = iterations,
        .tol = tol,
    };
    return s;
}

double euler_lagrange_residual(const StepProblem& p, const StepSolution& s) {
    const auto x = s.minimizer.positions();
    const auto a = p.previous().positions();
    const double floor = p.domain().spacing_floor();
    const double n = static_cast<double>(x.size());
    std::vector<double> grad(x.size(), 0.0);
    particles::energy_gradient(p.energy, x, p.energy.gap_floor_factor() * p.domain().length(), grad);
    const auto velocity = velocity_field(s.plan, p.cost, p.i);
    double worst = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] <= p.domain().lower + floor || x[j] >= p.domain().upper - floor) {
            continue;
        }
        if ((j > 0 && x[j] - x[j - 1] <= floor) || (j + 1 < x.size() && x[j + 1] - x[j] <= floor)) {
            continue;
        }
        worst = std::max(worst, std::abs(p.h * (velocity[j] + n * grad[j]) + (x[j] - a[j])));
    }
    return worst;
}

}  // namespace mmflow
