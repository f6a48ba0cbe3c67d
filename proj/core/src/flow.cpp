#include "mmflow/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "mmflow/errors.hpp"

namespace mmflow {

namespace {

std::string field(std::size_t i, const char* name) {
    return "populations[" + std::to_string(i) + "]." + name;
}

const Domain& domain_of(const InitialData& d) {
    return std::visit([](const auto& v) -> const Domain& { return v.domain(); }, d);
}

}  // namespace

std::size_t FlowConfig::steps() const {
    return static_cast<std::size_t>(std::floor(T / h + 1e-9));
}

double FlowConfig::tolerance() const { return tol > 0.0 ? tol : default_tolerance(n_particles); }

void FlowConfig::validate() const {
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw InvalidInput("field \"h\": time step must be positive");
    }
    if (!(T > 0.0) || !std::isfinite(T)) {
        throw InvalidInput("field \"T\": horizon must be positive");
    }
    if (steps() < 1) {
        throw InvalidInput("field \"T\": horizon shorter than one time step");
    }
    if (n_particles < 2) {
        throw InvalidInput("field \"n_particles\": need at least 2 particles");
    }
    if (!(tol >= 0.0) || !std::isfinite(tol)) {
        throw InvalidInput("field \"tol\": tolerance must be nonnegative (0 selects the default)");
    }
    if (max_iterations < 1) {
        throw InvalidInput("field \"max_iterations\": must be at least 1");
    }
    if (record_every < 1) {
        throw InvalidInput("field \"record_every\": must be at least 1");
    }
    if (populations.size() < 2) {
        throw InvalidInput("field \"populations\": need at least 2 populations");
    }
    for (std::size_t i = 0; i < populations.size(); ++i) {
        const auto& pop = populations[i];
        if (pop.cost.arity() != populations.size()) {
            throw InvalidInput("field \"" + field(i, "cost") + "\": arity " + std::to_string(pop.cost.arity()) +
                               " differs from the population count " + std::to_string(populations.size()));
        }
        if (!(pop.cost.domain() == domain)) {
            throw InvalidInput("field \"" + field(i, "cost") + "\": cost domain differs from the flow domain");
        }
        if (!(domain_of(pop.initial) == domain)) {
            throw InvalidInput("field \"" + field(i, "initial") + "\": domain differs from the flow domain");
        }
        if (const auto* rho = std::get_if<ParticleDensity>(&pop.initial); rho && rho->size() != n_particles) {
            throw InvalidInput("field \"" + field(i, "initial") + "\": particle count differs from n_particles");
        }
    }
}

std::vector<ParticleDensity> discretize_initial(const FlowConfig& cfg) {
    std::vector<ParticleDensity> out;
    out.reserve(cfg.populations.size());
    for (std::size_t i = 0; i < cfg.populations.size(); ++i) {
        const auto& pop = cfg.populations[i];
        if (const auto* grid = std::get_if<GridDensity>(&pop.initial)) {
            out.push_back(from_grid(*grid, cfg.n_particles));
        } else {
            out.push_back(std::get<ParticleDensity>(pop.initial));
        }
        double f = 0.0;
        try {
            f = energy_value(pop.energy, out.back());
        } catch (const InvalidInput& e) {
            throw InvalidInput("field \"" + field(i, "initial") + "\": " + e.what());
        }
        if (!std::isfinite(f)) {
            throw InvalidInput("field \"" + field(i, "initial") + "\": initial energy is not finite");
        }
    }
    return out;
}

FlowTrajectory run_flow(const FlowConfig& cfg) {
    cfg.validate();
    return run_flow(cfg, discretize_initial(cfg));
}

FlowTrajectory run_flow(const FlowConfig& cfg, std::vector<ParticleDensity> initial) {
    cfg.validate();
    const std::size_t l = cfg.populations.size();
    if (initial.size() != l) {
        throw InvalidInput("initial tuple has " + std::to_string(initial.size()) + " densities, expected " +
                           std::to_string(l));
    }
    for (const auto& rho : initial) {
        if (rho.size() != cfg.n_particles || !(rho.domain() == cfg.domain)) {
            throw InvalidInput("initial densities must have n_particles atoms on the flow domain");
        }
    }
    const std::size_t steps = cfg.steps();
    const SolverOptions options{cfg.tolerance(), cfg.max_iterations};

    FlowTrajectory tr;
    tr.h = cfg.h;
    tr.tol = cfg.tolerance();
    for (const auto& pop : cfg.populations) {
        tr.energies.push_back(pop.energy);
        tr.costs.push_back(pop.cost);
    }
    tr.states.reserve(steps + 1);
    tr.states.push_back(std::move(initial));
    tr.records.push_back({0, 0.0, tr.states.front(), {}});
    tr.diagnostics.reserve(steps * l);

    for (std::size_t k = 0; k < steps; ++k) {
        const auto& current = tr.states.back();
        std::vector<ParticleDensity> next;
        std::vector<MultiMarginalPlan> plans;
        next.reserve(l);
        for (std::size_t i = 0; i < l; ++i) {
            const StepProblem p(current, i, cfg.populations[i].energy, cfg.populations[i].cost, cfg.h);
            StepSolution s = [&] {
                try {
                    return solve_step(p, options);
                } catch (const NumericalFailure& e) {
                    throw NumericalFailure("population " + std::to_string(i) + ", step " + std::to_string(k) + ": " +
                                               e.what(),
                                           e.residual());
                }
            }();
            StepDiagnostics d;
            d.k = k;
            d.t = cfg.h * static_cast<double>(k + 1);
            d.i = i;
            d.energy = energy_value(p.energy, s.minimizer);
            d.step_w2_sq = s.w2_to_previous * s.w2_to_previous;
            d.el_residual = euler_lagrange_residual(p, s);
            d.objective = s.objective_value;
            d.objective_at_previous = s.objective_at_previous;
            d.objective_change = s.objective_change;
            d.first_order_residual = s.first_order_residual;
            d.iterations = s.iterations;
            d.collisions = p.energy.kind() == EnergyKind::zero ? 0 : collision_count(p.energy, s.minimizer);
            tr.diagnostics.push_back(d);
            next.push_back(std::move(s.minimizer));
            plans.push_back(std::move(s.plan));
        }
        tr.states.push_back(std::move(next));
        if ((k + 1) % cfg.record_every == 0 || k + 1 == steps) {
            tr.records.push_back({k + 1, cfg.h * static_cast<double>(k + 1), tr.states.back(), std::move(plans)});
        }
    }
    return tr;
}

EstimateReport estimate_report(const FlowTrajectory& tr) {
    const std::size_t l = tr.populations();
    const double horizon = tr.h * static_cast<double>(tr.steps());
    EstimateReport report;
    report.populations.resize(l);
    for (std::size_t i = 0; i < l; ++i) {
        auto& est = report.populations[i];
        est.initial_energy = energy_value(tr.energies[i], tr.states.front()[i]);
        est.max_energy = est.min_energy = est.initial_energy;
        est.lipschitz = tr.costs[i].partial_bound(i);
    }
    for (const auto& d : tr.diagnostics) {
        auto& est = report.populations[d.i];
        est.max_energy = std::max(est.max_energy, d.energy);
        est.min_energy = std::min(est.min_energy, d.energy);
        est.sum_w2_sq += d.step_w2_sq;
        est.max_descent_violation = std::max(est.max_descent_violation, d.objective_change);
    }
    for (auto& est : report.populations) {
        const double c2t = est.lipschitz * est.lipschitz * horizon;
        const double slack = 1e-10 * (1.0 + std::abs(est.initial_energy));
        est.ratio = est.sum_w2_sq / tr.h;
        est.telescoping_bound = 4.0 * tr.h * (est.initial_energy - est.min_energy + c2t);
        est.telescoping_ok = est.sum_w2_sq <= est.telescoping_bound + slack;
        est.energy_bound = est.initial_energy + 0.5 * c2t;
        est.energy_ok = est.max_energy <= est.energy_bound + slack;
        est.descent_ok = est.max_descent_violation <= 10.0 * tr.tol;
        report.passed = report.passed && est.telescoping_ok && est.energy_ok && est.descent_ok;
    }
    return report;
}

ContractionReport contraction_probe(const FlowConfig& cfg, const std::vector<ParticleDensity>& init_a,
                                    const std::vector<ParticleDensity>& init_b, double slack) {
    ContractionReport report;
    report.slack = slack;
    for (std::size_t i = 0; i < cfg.populations.size(); ++i) {
        if (!mccann_check(cfg.populations[i].energy)) {
            report.skipped = true;
            report.reason = "McCann check failed";
            return report;
        }
        if (!cfg.populations[i].cost.comonotone_certified()) {
            report.skipped = true;
            report.reason = "cost not certified comonotone";
            return report;
        }
    }
    const FlowTrajectory a = run_flow(cfg, init_a);
    const FlowTrajectory b = run_flow(cfg, init_b);
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        report.t.push_back(cfg.h * static_cast<double>(k));
        report.distance.push_back(product_w2(a.states[k], b.states[k]));
        if (k > 0) {
            report.max_violation = std::max(report.max_violation, report.distance[k] - report.distance[k - 1]);
        }
    }
    report.c_probe = report.max_violation / (cfg.h + 1.0 / static_cast<double>(cfg.n_particles));
    report.passed = report.max_violation <= slack;
    return report;
}

TestFunction TestFunction::constant() {
    return {"constant", [](double, double) { return 1.0; }, [](double, double) { return 0.0; }, 0.0, 0.0};
}

TestFunction TestFunction::bump(double center, double radius) {
    if (!(radius > 0.0)) {
        throw InvalidInput("bump radius must be positive");
    }
    // Profile b(r) = exp(1 - 1/(1 - r^2)) and its first two r-derivatives.
    auto profile = [](double r, int order) {
        const double s = 1.0 - r * r;
        if (s <= 0.0) {
            return 0.0;
        }
        const double b = std::exp(1.0 - 1.0 / s);
        if (order == 0) {
            return b;
        }
        if (order == 1) {
            return b * (-2.0 * r / (s * s));
        }
        return b * (4.0 * r * r / (s * s * s * s) - 2.0 / (s * s) - 8.0 * r * r / (s * s * s));
    };
    TestFunction f;
    f.name = "bump";
    f.phi = [=](double t, double x) { return profile((x - center) / radius, 0) / (1.0 + t); };
    f.phi_x = [=](double t, double x) { return profile((x - center) / radius, 1) / (radius * (1.0 + t)); };
    double d1 = 0.0, d2 = 0.0;
    constexpr int samples = 20000;
    for (int s = 0; s <= samples; ++s) {
        const double r = -1.0 + 2.0 * s / samples;
        d1 = std::max(d1, std::abs(profile(r, 1)));
        d2 = std::max(d2, std::abs(profile(r, 2)));
    }
    f.phi_x_bound = 1.01 * d1 / radius;
    f.phi_xx_bound = 1.01 * d2 / (radius * radius);
    return f;
}

WeakFormReport weak_form_residual(const FlowTrajectory& tr, const TestFunction& phi) {
    const std::size_t l = tr.populations();
    const std::size_t steps = tr.steps();
    WeakFormReport report;
    for (std::size_t i = 0; i < l; ++i) {
        const std::size_t n = tr.states.front()[i].size();
        const double nn = static_cast<double>(n);
        const double floor = tr.energies[i].gap_floor_factor() * tr.states.front()[i].domain().length();
        double time_part = 0.0;
        double flux_part = 0.0;
        double sum_w2 = 0.0;
        double sum_el = 0.0;
        std::vector<double> grad(n), point(l);
        for (std::size_t k = 0; k < steps; ++k) {
            const double t0 = tr.h * static_cast<double>(k);
            const double t1 = tr.h * static_cast<double>(k + 1);
            const auto x = tr.states[k + 1][i].positions();
            particles::energy_gradient(tr.energies[i], x, floor, grad);
            for (std::size_t j = 0; j < n; ++j) {
                time_part += (phi.phi(t1, x[j]) - phi.phi(t0, x[j])) / nn;
                double u = 0.0;
                if (!tr.costs[i].is_zero()) {
                    for (std::size_t q = 0; q < l; ++q) {
                        point[q] = q == i ? x[j] : tr.states[k][q][j];
                    }
                    u = tr.costs[i].partial(i, point);
                }
                flux_part += tr.h * (grad[j] + u / nn) * phi.phi_x(t0, x[j]);
            }
            const auto& d = tr.diagnostics[k * l + i];
            sum_w2 += d.step_w2_sq;
            sum_el += d.el_residual;
        }
        const double horizon = tr.h * static_cast<double>(steps);
        double boundary = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            boundary += (phi.phi(horizon, tr.states.back()[i][j]) - phi.phi(0.0, tr.states.front()[i][j])) / nn;
        }
        const double residual = std::abs(time_part - flux_part - boundary);
        const double bound = 0.5 * phi.phi_xx_bound * sum_w2 + phi.phi_x_bound * sum_el;
        report.residual.push_back(residual);
        report.bound.push_back(bound);
        report.passed = report.passed && residual <= bound + 1e-12;
    }
    return report;
}

namespace {

struct BarenblattShape {
    double beta, k, c, power;
};

BarenblattShape barenblatt_shape(double m) {
    if (!(m > 1.0)) {
        throw DomainError("Barenblatt profile needs m > 1");
    }
    const double beta = 1.0 / (m + 1.0);
    const double k = beta * (m - 1.0) / (2.0 * m);
    const double power = 1.0 / (m - 1.0);
    // Unit mass: C^(power + 1/2) k^(-1/2) B(1/2, power + 1) = 1.
    const double c = std::pow(std::sqrt(k) / std::beta(0.5, power + 1.0), 1.0 / (power + 0.5));
    return {beta, k, c, power};
}

}  // namespace

double barenblatt(double m, double t, double x, double center) {
    if (!(t > 0.0)) {
        throw DomainError("Barenblatt profile needs t > 0");
    }
    const auto s = barenblatt_shape(m);
    const double tau = (m - 1.0) * t;  // rho_t = ((m-1) rho^m)_xx is u_tau = (u^m)_xx
    const double xi = (x - center) * std::pow(tau, -s.beta);
    const double base = s.c - s.k * xi * xi;
    return base > 0.0 ? std::pow(tau, -s.beta) * std::pow(base, s.power) : 0.0;
}

double barenblatt_radius(double m, double t) {
    const auto s = barenblatt_shape(m);
    return std::sqrt(s.c / s.k) * std::pow((m - 1.0) * t, s.beta);
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_trajectory_csv(const FlowTrajectory& tr, std::size_t i, std::ostream& out) {
    if (i >= tr.populations()) {
        throw InvalidInput("population index " + std::to_string(i) + " out of range");
    }
    const std::size_t n = tr.states.front()[i].size();
    out << "t";
    for (std::size_t j = 0; j < n; ++j) {
        out << ",particle_" << j;
    }
    out << '\n';
    for (const auto& rec : tr.records) {
        out << format_number(rec.t);
        for (double x : rec.states[i].positions()) {
            out << ',' << format_number(x);
        }
        out << '\n';
    }
}

void write_diagnostics_csv(const FlowTrajectory& tr, std::ostream& out) {
    out << "t,i,energy,step_w2_sq,el_residual,objective\n";
    for (const auto& d : tr.diagnostics) {
        out << format_number(d.t) << ',' << d.i << ',' << format_number(d.energy) << ','
            << format_number(d.step_w2_sq) << ',' << format_number(d.el_residual) << ','
            << format_number(d.objective) << '\n';
    }
}

}  // namespace mmflow
