// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mmflow/energy.hpp"
#include "mmflow/errors.hpp"
#include "mmflow/flow.hpp"
#include "mmflow/jko.hpp"
#include "mmflow/scenario.hpp"
#include "mmflow/transport.hpp"

namespace {

using namespace mmflow;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!ok) {
        ++failures;
    }
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

ParticleDensity random_density(std::mt19937_64& rng, const Domain& d, std::size_t n, double margin = 0.0) {
    std::uniform_real_distribution<double> u(d.lower + margin * d.length(), d.upper - margin * d.length());
    std::vector<double> x(n);
    for (double& v : x) {
        v = u(rng);
    }
    std::sort(x.begin(), x.end());
    return ParticleDensity(d, x);
}

std::vector<ParticleDensity> random_tuple(std::mt19937_64& rng, const Domain& d, std::size_t l, std::size_t n) {
    std::vector<ParticleDensity> out;
    for (std::size_t i = 0; i < l; ++i) {
        out.push_back(random_density(rng, d, n));
    }
    return out;
}

std::vector<DiscreteMeasure> as_measures(const std::vector<ParticleDensity>& t) {
    std::vector<DiscreteMeasure> out;
    for (const auto& p : t) {
        out.emplace_back(p);
    }
    return out;
}

const Domain unit(0.0, 1.0);

// Random certified cost of arity l: barycenter with random weights and
// center, or for l = 2 the pairwise quadratic and a bilinear attraction.
CostFunction random_certified_cost(std::mt19937_64& rng, std::size_t l) {
    std::uniform_real_distribution<double> w(0.1, 3.0);
    std::uniform_int_distribution<int> pick(0, 2);
    const int kind = pick(rng);
    if (l == 2 && kind == 1) {
        return CostFunction::quadratic_pairwise(unit);
    }
    if (l == 2 && kind == 2) {
        const double a = w(rng);
        return CostFunction::custom(
            "bilinear_attraction", unit, 2, [a](std::span<const double> x) { return -a * x[0] * x[1]; },
            [a](std::size_t i, std::span<const double> x) { return -a * x[1 - i]; });
    }
    std::vector<double> weights(l - 1);
    for (double& v : weights) {
        v = w(rng);
    }
    std::uniform_int_distribution<std::size_t> center(0, l - 1);
    return CostFunction::barycenter(unit, weights, center(rng));
}

void comonotone_optimality() {
    const auto start = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> arity(2, 3), size(1, 5);
    double worst = 0.0;
    std::size_t uncertified = 0;
    const std::size_t instances = 240;
    for (std::size_t k = 0; k < instances; ++k) {
        const std::size_t l = arity(rng);
        const auto tuple = random_tuple(rng, unit, l, size(rng));
        const auto cost = random_certified_cost(rng, l);
        uncertified += !cost.comonotone_certified();
        const double mono = monotone_plan(tuple, cost).cost_value;
        const double lp = lp_solve_mm(as_measures(tuple), cost).cost_value;
        worst = std::max(worst, std::abs(mono - lp));
    }
    const double elapsed = seconds_since(start);
    report(1, worst <= 1e-9 && uncertified == 0 && elapsed <= 60.0,
           "co-monotone plan optimal: instances=" + std::to_string(instances) + " max_gap=" + num(worst) +
               " limit=1e-09 uncertified=" + std::to_string(uncertified) + " seconds=" + num(elapsed));
}

void lipschitz_bound() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<std::size_t> arity(2, 3), size(1, 40);
    std::size_t violations = 0;
    double worst = -1e300;
    const std::size_t triples = 600;
    for (std::size_t k = 0; k < triples; ++k) {
        const std::size_t l = arity(rng);
        const std::size_t n = size(rng);
        const auto mu = random_tuple(rng, unit, l, n);
        const auto cost = random_certified_cost(rng, l);
        const std::size_t i = k % l;
        const auto r1 = random_density(rng, unit, n);
        const auto r2 = random_density(rng, unit, n);
        const double lhs = std::abs(frozen_interaction(cost, mu, i, r1) - frozen_interaction(cost, mu, i, r2));
        const double rhs = cost.partial_bound(i) * w2_distance(r1, r2) + 1e-12;
        violations += lhs > rhs;
        worst = std::max(worst, lhs - rhs);
    }
    report(2, violations == 0,
           "interaction Lipschitz in W2: triples=" + std::to_string(triples) +
               " violations=" + std::to_string(violations) + " max_excess=" + num(worst));
}

void single_particle_step() {
    double worst = 0.0;
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double h : {1e-3, 1e-2, 1e-1}) {
        for (int k = 0; k < 10; ++k) {
            const double xk = u(rng), y = u(rng);
            const StepProblem p({ParticleDensity(unit, {xk}), ParticleDensity(unit, {y})}, 0, InternalEnergy::zero(),
                                CostFunction::quadratic_pairwise(unit), h);
            const auto s = solve_step(p);
            worst = std::max(worst, std::abs(s.minimizer[0] - (xk + 2.0 * h * y) / (1.0 + 2.0 * h)));
        }
    }
    report(3, worst <= 1e-10, "N=1 closed-form step: h in {1e-3,1e-2,1e-1} max_error=" + num(worst) + " limit=1e-10");
}

double population_sum(const EstimateReport& r, std::size_t i) { return r.populations[i].sum_w2_sq; }

void descent_and_telescoping() {
    bool ok = true;
    std::string detail;
    for (const std::string name : {"heat", "barycenter3"}) {
        Scenario s = preset(name);
        s.n_particles = 128;
        s.T = 1.0;
        FlowConfig cfg = build_flow_config(s);
        const auto coarse_tr = run_flow(cfg);
        const auto coarse = estimate_report(coarse_tr);
        cfg.h = s.h / 2.0;
        const auto fine = estimate_report(run_flow(cfg));
        double worst_descent = -1e300;
        for (const auto& d : coarse_tr.diagnostics) {
            worst_descent = std::max(worst_descent, d.objective_change);
        }
        const bool descent = worst_descent <= 10.0 * coarse_tr.tol && coarse.passed;
        ok = ok && descent;
        detail += " " + name + ": max_objective_change=" + num(worst_descent) + " limit=" + num(10.0 * coarse_tr.tol) +
                  " estimates=" + (coarse.passed ? "ok" : "violated");
        for (std::size_t i = 0; i < coarse.populations.size(); ++i) {
            const double ratio = population_sum(coarse, i) / population_sum(fine, i);
            ok = ok && ratio >= 1.6 && ratio <= 2.4;
            detail += " ratio_pop" + std::to_string(i) + "=" + num(ratio);
        }
    }
    report(4, ok, "descent and halving of sum W2^2 (limit [1.6, 2.4]):" + detail);
}

void euler_lagrange() {
    std::mt19937_64 rng(505);
    std::uniform_int_distribution<std::size_t> arity(2, 3);
    std::uniform_real_distribution<double> step(1e-3, 5e-2);
    double worst_ratio = 0.0;
    const int problems = 100;
    for (int k = 0; k < problems; ++k) {
        const std::size_t l = arity(rng);
        const auto frozen = [&] {
            std::vector<ParticleDensity> t;
            for (std::size_t i = 0; i < l; ++i) {
                t.push_back(random_density(rng, unit, 32, 0.05));
            }
            return t;
        }();
        const auto energy = k % 3 == 0 ? InternalEnergy::power_law(2.0 + 0.5 * (k % 2)) : InternalEnergy::entropy();
        const auto cost = random_certified_cost(rng, l);
        const StepProblem p(frozen, k % l, energy, cost, step(rng));
        const auto s = solve_step(p);
        worst_ratio = std::max(worst_ratio, euler_lagrange_residual(p, s) / s.tol);
    }
    report(5, worst_ratio <= 10.0,
           "Euler-Lagrange residual: problems=" + std::to_string(problems) + " N=32 max_residual_over_tol=" +
               num(worst_ratio) + " limit=10");
}

void diffusion_ground_truth() {
    bool ok = true;
    std::string detail;
    {
        const auto start = Clock::now();
        Scenario s = preset("heat");
        s.n_particles = 128;
        s.h = 1e-2;
        s.T = 2.0;
        const auto tr = run_flow(build_flow_config(s));
        double worst = 0.0;
        for (const auto& rho : tr.states.back()) {
            worst = std::max(worst, l1_distance(gap_reconstruction(rho), [](double) { return 1.0; }));
        }
        const double elapsed = seconds_since(start);
        ok = ok && worst <= 0.05 && elapsed <= 120.0;
        detail += "heat L1_to_uniform=" + num(worst) + " limit=0.05 seconds=" + num(elapsed);
    }
    {
        const auto start = Clock::now();
        Scenario s = preset("porous_medium");
        s.n_particles = 256;
        s.h = 2e-3;
        const double t_final = 0.05;
        const double t0 = s.populations[0].initial.time;
        s.T = t_final - t0;
        const auto tr = run_flow(build_flow_config(s));
        const double m = s.populations[0].energy.exponent();
        const double center = s.populations[0].initial.center;
        const double err = l1_distance(gap_reconstruction(tr.states.back()[0]),
                                       [&](double x) { return barenblatt(m, t_final, x, center); });
        const bool inside = barenblatt_radius(m, t_final) < std::min(center - s.domain.lower, s.domain.upper - center);
        const double elapsed = seconds_since(start);
        ok = ok && err <= 0.08 && inside && elapsed <= 120.0;
        detail += "; porous_medium L1_to_Barenblatt(t=0.05)=" + num(err) + " limit=0.08 support_inside=" +
                  (inside ? "yes" : "no") + " seconds=" + num(elapsed);
    }
    report(6, ok, "diffusion ground truth: " + detail);
}

void contraction() {
    bool ok = true;
    std::string detail;
    for (const std::string name : {"heat", "barycenter3"}) {
        Scenario s = preset(name);
        s.n_particles = 128;
        s.h = 1e-2;
        const FlowConfig cfg = build_flow_config(s);
        const auto init_a = discretize_initial(cfg);
        const auto probe = std::find_if(s.probes.begin(), s.probes.end(),
                                        [](const ProbeSpec& p) { return p.type == ProbeType::contraction_probe; });
        std::vector<ParticleDensity> init_b;
        for (const auto& profile : probe->initial) {
            init_b.push_back(from_grid(profile_density(profile, s.domain), cfg.n_particles));
        }
        const auto r = contraction_probe(cfg, init_a, init_b, 1e-3);
        ok = ok && !r.skipped && r.passed;
        detail += " " + name + ": max_increase=" + num(r.max_violation) + " c_probe=" + num(r.c_probe) +
                  " initial=" + num(r.distance.front()) + " final=" + num(r.distance.back()) +
                  (r.skipped ? " skipped=" + r.reason : "");
    }
    report(7, ok, "product W2 nonincreasing up to slack 1e-3:" + detail);
}

void geodesic_convexity() {
    std::mt19937_64 rng(707);
    const std::vector<double> ts{0.1, 0.25, 0.5, 0.75, 0.9};
    const std::vector<CostFunction> certified{CostFunction::quadratic_pairwise(unit),
                                              CostFunction::barycenter(unit, {1.0, 2.0}, 0),
                                              CostFunction::barycenter(unit, {0.5, 1.0, 1.5}, 2)};
    double worst = 0.0;
    std::size_t pairs = 0;
    for (const auto& cost : certified) {
        for (int k = 0; k < 100; ++k) {
            const auto a = random_tuple(rng, unit, cost.arity(), 16);
            const auto b = random_tuple(rng, unit, cost.arity(), 16);
            worst = std::max(worst, convexity_probe(cost, a, b, ts).max_violation);
            ++pairs;
        }
    }
    // Positive mixed derivative: the optimal coupling is anti-monotone.
    const auto anti = CostFunction::custom(
        "product", unit, 2, [](std::span<const double> x) { return x[0] * x[1]; },
        [](std::size_t i, std::span<const double> x) { return x[1 - i]; });
    double anti_worst = 0.0;
    for (int k = 0; k < 100 && anti_worst <= 0.0; ++k) {
        const auto a = random_tuple(rng, unit, 2, 3);
        const auto b = random_tuple(rng, unit, 2, 3);
        anti_worst = std::max(anti_worst, convexity_probe(anti, a, b, ts).max_violation);
    }
    report(8, worst <= 1e-8 && anti_worst > 0.0 && !anti.comonotone_certified(),
           "geodesic convexity: certified_pairs=" + std::to_string(pairs) + " max_violation=" + num(worst) +
               " limit=1e-08 non_comonotone_violation=" + num(anti_worst));
}

template <class Value>
double fd_relative_error(std::span<const double> x, std::span<const double> g, Value delta) {
    double scale = 0.0;
    for (double v : g) {
        scale = std::max(scale, std::abs(v));
    }
    double worst = 0.0;
    const std::size_t n = x.size();
    for (std::size_t j = 0; j < n; ++j) {
        double gap = 1.0;
        if (j > 0) gap = std::min(gap, x[j] - x[j - 1]);
        if (j + 1 < n) gap = std::min(gap, x[j + 1] - x[j]);
        const double step = std::min(1e-6, 1e-3 * gap);
        std::vector<double> up(x.begin(), x.end()), down(x.begin(), x.end());
        up[j] += step;
        down[j] -= step;
        const double fd = delta(down, up) / (2.0 * step);
        worst = std::max(worst, std::abs(fd - g[j]) / std::max(scale, 1e-300));
    }
    return worst;
}

void gradient_checks() {
    std::mt19937_64 rng(909);
    std::uniform_int_distribution<std::size_t> size(3, 40);
    const std::vector<InternalEnergy> energies{InternalEnergy::entropy(), InternalEnergy::power_law(2.0),
                                               InternalEnergy::power_law(3.0)};
    double energy_worst = 0.0, objective_worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto& e = energies[k % energies.size()];
        const auto rho = random_density(rng, unit, size(rng), 0.05);
        const auto g = energy_gradient(e, rho);
        energy_worst = std::max(energy_worst, fd_relative_error(rho.positions(), g, [&](const auto& a, const auto& b) {
                                    return particles::energy_delta(e, a, b,
                                                                   rho.domain().length() * e.gap_floor_factor());
                                }));
    }
    std::uniform_int_distribution<std::size_t> arity(2, 3);
    for (int k = 0; k < 100; ++k) {
        const std::size_t l = arity(rng);
        const std::size_t n = size(rng);
        std::vector<ParticleDensity> frozen;
        for (std::size_t i = 0; i < l; ++i) {
            frozen.push_back(random_density(rng, unit, n, 0.05));
        }
        const StepProblem p(frozen, k % l, energies[k % energies.size()], random_certified_cost(rng, l), 0.02);
        const auto x = random_density(rng, unit, n, 0.05).position_vector();
        const auto g = objective_gradient(p, x);
        objective_worst = std::max(objective_worst, fd_relative_error(x, g, [&](const auto& a, const auto& b) {
                                       return objective_delta(p, a, b);
                                   }));
    }
    report(9, energy_worst <= 1e-5 && objective_worst <= 1e-5,
           "finite-difference gradients: configurations=100+100 energy_max_rel=" + num(energy_worst) +
               " objective_max_rel=" + num(objective_worst) + " limit=1e-05");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void determinism() {
    const fs::path root = fs::temp_directory_path() / "mmflow_acceptance_determinism";
    bool ok = true;
    std::size_t compared = 0;
    std::string detail;
    for (const auto& name : preset_names()) {
        const Scenario s = parse_scenario(slurp(fs::path(MMFLOW_SCENARIO_DIR) / (name + ".json")));
        std::vector<RunResult> runs;
        for (int rep = 0; rep < 2; ++rep) {
            RunOptions opt;
            opt.output_dir = root / name / std::to_string(rep);
            opt.base_dir = MMFLOW_SCENARIO_DIR;
            fs::remove_all(opt.output_dir);
            runs.push_back(run_scenario(s, opt));
        }
        for (const auto& file : runs[0].files) {
            if (file.ends_with(".csv")) {
                const bool same = slurp(root / name / "0" / file) == slurp(root / name / "1" / file);
                ok = ok && same;
                ++compared;
                if (!same) {
                    detail += " differs=" + name + "/" + file;
                }
            }
        }
        ok = ok && runs[0].files == runs[1].files && runs[0].exit_code == runs[1].exit_code;
    }
    report(10, ok && compared > 0,
           "byte-identical CSVs across two runs: presets=" + std::to_string(preset_names().size()) +
               " files=" + std::to_string(compared) + detail);
}

template <class F>
void guarded(int id, F f) {
    try {
        f();
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

}  // namespace

int main() {
    guarded(1, comonotone_optimality);
    guarded(2, lipschitz_bound);
    guarded(3, single_particle_step);
    guarded(4, descent_and_telescoping);
    guarded(5, euler_lagrange);
    guarded(6, diffusion_ground_truth);
    guarded(7, contraction);
    guarded(8, geodesic_convexity);
    guarded(9, gradient_checks);
    guarded(10, determinism);
    std::printf("%s: %d failing criteria\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
