#include "mmflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mmflow/errors.hpp"
#include "mmflow/lp.hpp"

namespace mmflow {

namespace {

constexpr double kGapTarget = 1e-10;
constexpr std::size_t kMaxSweeps = 10000;
constexpr double kLpCapacity = 1e6;
constexpr double kEnumerationCapacity = 1e7;

// Mixed-radix enumeration of index tuples over marginal sizes.
class TupleCounter {
public:
    explicit TupleCounter(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)), index_(sizes_.size(), 0) {}

    const std::vector<std::size_t>& index() const { return index_; }

    bool next() {
        for (std::size_t k = sizes_.size(); k-- > 0;) {
            if (++index_[k] < sizes_[k]) {
                return true;
            }
            index_[k] = 0;
        }
        return false;
    }

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> index_;
};

std::vector<std::size_t> marginal_sizes(std::span<const DiscreteMeasure> m) {
    std::vector<std::size_t> sizes;
    for (const auto& mu : m) {
        sizes.push_back(mu.size());
    }
    return sizes;
}

double tuple_count(const std::vector<std::size_t>& sizes) {
    double total = 1.0;
    for (std::size_t s : sizes) {
        total *= static_cast<double>(s);
    }
    return total;
}

void require_shared_n(std::span<const ParticleDensity> marginals) {
    if (marginals.empty()) {
        throw InvalidInput("need at least one marginal");
    }
    for (const auto& rho : marginals) {
        if (rho.size() != marginals.front().size()) {
            throw InvalidInput("all marginals must share the particle count N");
        }
    }
}

struct LpPlan {
    MultiMarginalPlan plan;
    std::vector<std::vector<double>> duals;
};

LpPlan solve_with_duals(std::span<const DiscreteMeasure> marginals, const CostFunction& cost) {
    const std::size_t l = marginals.size();
    if (l != cost.arity()) {
        throw InvalidInput("cost arity " + std::to_string(cost.arity()) + " does not match " +
                           std::to_string(l) + " marginals");
    }
    const auto sizes = marginal_sizes(marginals);
    const double tuples = tuple_count(sizes);
    if (static_cast<double>(l) * tuples > kLpCapacity) {
        throw CapacityError("multi-marginal LP oracle limited to l * K^l <= 1e6");
    }
    for (const auto& mu : marginals) {
        double mass = std::accumulate(mu.weights.begin(), mu.weights.end(), 0.0);
        if (mu.atoms.size() != mu.weights.size() || std::abs(mass - 1.0) > 1e-12) {
            throw InvalidInput("marginals must be probability measures of equal mass");
        }
    }

    lp::StandardForm problem;
    problem.cols = static_cast<std::size_t>(tuples);
    std::vector<std::size_t> offset(l, 0);
    for (std::size_t i = 1; i < l; ++i) {
        offset[i] = offset[i - 1] + sizes[i - 1];
    }
    problem.rows = offset.back() + sizes.back();
    problem.a.assign(problem.rows * problem.cols, 0.0);
    problem.c.resize(problem.cols);
    for (std::size_t i = 0; i < l; ++i) {
        for (double w : marginals[i].weights) {
            problem.b.push_back(w);
        }
    }
    std::vector<std::vector<std::size_t>> tuple_of(problem.cols);
    std::vector<double> point(l);
    TupleCounter counter(sizes);
    std::size_t col = 0;
    do {
        const auto& idx = counter.index();
        for (std::size_t i = 0; i < l; ++i) {
            point[i] = marginals[i].atoms[idx[i]];
            problem.a[(offset[i] + idx[i]) * problem.cols + col] = 1.0;
        }
        problem.c[col] = cost.evaluate(point);
        tuple_of[col] = idx;
        ++col;
    } while (counter.next());

    const lp::Solution sol = lp::solve(problem);

    LpPlan out;
    out.plan.form = PlanForm::sparse;
    out.plan.marginals.assign(marginals.begin(), marginals.end());
    for (std::size_t j = 0; j < problem.cols; ++j) {
        if (sol.x[j] > 1e-15) {
            out.plan.support.push_back({tuple_of[j], sol.x[j]});
        }
    }
    out.plan.cost_value = out.plan.recompute_cost(cost);
    out.duals.resize(l);
    for (std::size_t i = 0; i < l; ++i) {
        out.duals[i].assign(sol.duals.begin() + static_cast<std::ptrdiff_t>(offset[i]),
                            sol.duals.begin() + static_cast<std::ptrdiff_t>(offset[i] + sizes[i]));
    }
    return out;
}

// Cost at every index tuple, in TupleCounter order.
std::vector<double> tabulate_cost(const MultiMarginalPlan& plan, const CostFunction& cost) {
    const auto sizes = marginal_sizes(plan.marginals);
    if (tuple_count(sizes) > kEnumerationCapacity) {
        throw CapacityError("potential computation limited to 1e7 index tuples");
    }
    std::vector<double> table;
    table.reserve(static_cast<std::size_t>(tuple_count(sizes)));
    std::vector<double> point(sizes.size());
    TupleCounter counter(sizes);
    do {
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            point[i] = plan.marginals[i].atoms[counter.index()[i]];
        }
        table.push_back(cost.evaluate(point));
    } while (counter.next());
    return table;
}

// u_i <- inf over tuples of c - sum_{j != i} u_j.
void c_conjugate(std::vector<std::vector<double>>& u, std::size_t i, const std::vector<double>& table,
                 const std::vector<std::size_t>& sizes) {
    std::vector<double> best(sizes[i], std::numeric_limits<double>::infinity());
    TupleCounter counter(sizes);
    std::size_t t = 0;
    do {
        const auto& idx = counter.index();
        double v = table[t++];
        for (std::size_t j = 0; j < sizes.size(); ++j) {
            if (j != i) {
                v -= u[j][idx[j]];
            }
        }
        best[idx[i]] = std::min(best[idx[i]], v);
    } while (counter.next());
    u[i] = std::move(best);
}

double dual_value(const std::vector<std::vector<double>>& u, const MultiMarginalPlan& plan) {
    double total = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        for (std::size_t a = 0; a < u[i].size(); ++a) {
            total += plan.marginals[i].weights[a] * u[i][a];
        }
    }
    return total;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<double> a, std::vector<double> w)
    : atoms(std::move(a)), weights(std::move(w)) {
    if (atoms.empty() || atoms.size() != weights.size()) {
        throw InvalidInput("discrete measure needs matching nonempty atoms and weights");
    }
    double mass = 0.0;
    for (double v : weights) {
        if (!(v >= 0.0)) {
            throw InvalidInput("discrete measure weights must be nonnegative");
        }
        mass += v;
    }
    if (std::abs(mass - 1.0) > 1e-12) {
        throw InvalidInput("discrete measure mass " + std::to_string(mass) + " differs from 1");
    }
}

DiscreteMeasure::DiscreteMeasure(const ParticleDensity& rho)
    : atoms(rho.position_vector()), weights(rho.size(), 1.0 / static_cast<double>(rho.size())) {}

std::vector<double> MultiMarginalPlan::point(const PlanAtom& atom) const {
    std::vector<double> x(marginals.size());
    for (std::size_t i = 0; i < marginals.size(); ++i) {
        x[i] = marginals[i].atoms[atom.index[i]];
    }
    return x;
}

std::vector<double> MultiMarginalPlan::marginal_weights(std::size_t i) const {
    std::vector<double> w(marginals.at(i).size(), 0.0);
    for (const auto& atom : support) {
        w[atom.index[i]] += atom.weight;
    }
    return w;
}

double MultiMarginalPlan::recompute_cost(const CostFunction& cost) const {
    double total = 0.0;
    for (const auto& atom : support) {
        total += atom.weight * cost.evaluate(point(atom));
    }
    return total;
}

MultiMarginalPlan monotone_plan(std::span<const ParticleDensity> marginals, const CostFunction& cost) {
    require_shared_n(marginals);
    if (marginals.size() != cost.arity()) {
        throw InvalidInput("cost arity does not match the number of marginals");
    }
    const std::size_t n = marginals.front().size();
    const std::size_t l = marginals.size();
    MultiMarginalPlan plan;
    plan.form = PlanForm::comonotone;
    for (const auto& rho : marginals) {
        plan.marginals.emplace_back(rho);
    }
    plan.support.reserve(n);
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        plan.support.push_back({std::vector<std::size_t>(l, j), w});
    }
    plan.cost_value = plan.recompute_cost(cost);
    return plan;
}

double frozen_interaction(const CostFunction& cost, std::span<const ParticleDensity> frozen, std::size_t i,
                          const ParticleDensity& rho) {
    if (frozen.size() != cost.arity() || i >= frozen.size()) {
        throw InvalidInput("frozen tuple does not match the cost arity");
    }
    require_shared_n(frozen);
    if (rho.size() != frozen.front().size()) {
        throw InvalidInput("density and frozen tuple must share N");
    }
    const std::size_t n = rho.size();
    std::vector<double> point(frozen.size());
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < frozen.size(); ++k) {
            point[k] = k == i ? rho[j] : frozen[k][j];
        }
        total += cost.evaluate(point);
    }
    return total / static_cast<double>(n);
}

MultiMarginalPlan lp_solve_mm(std::span<const DiscreteMeasure> marginals, const CostFunction& cost) {
    return solve_with_duals(marginals, cost).plan;
}

std::vector<double> velocity_field(const MultiMarginalPlan& plan, const CostFunction& cost, std::size_t i) {
    if (i >= plan.arity()) {
        throw InvalidInput("velocity_field index " + std::to_string(i) + " out of range");
    }
    std::vector<double> num(plan.marginals[i].size(), 0.0);
    std::vector<double> den(plan.marginals[i].size(), 0.0);
    for (const auto& atom : plan.support) {
        const auto x = plan.point(atom);
        num[atom.index[i]] += atom.weight * cost.partial(i, x);
        den[atom.index[i]] += atom.weight;
    }
    for (std::size_t a = 0; a < num.size(); ++a) {
        num[a] = den[a] > 0.0 ? num[a] / den[a] : 0.0;
    }
    return num;
}

KantorovichPotentials kantorovich_potentials(const MultiMarginalPlan& plan, const CostFunction& cost) {
    const std::size_t l = plan.arity();
    if (l != cost.arity() || l < 2) {
        throw InvalidInput("plan and cost arity differ");
    }
    const auto sizes = marginal_sizes(plan.marginals);
    const auto table = tabulate_cost(plan, cost);
    const double primal = plan.recompute_cost(cost);

    KantorovichPotentials result;
    result.u.resize(l);
    // Seed: integrate dc/dx_i along the sorted atoms of each marginal.
    for (std::size_t i = 0; i + 1 < l; ++i) {
        const auto& atoms = plan.marginals[i].atoms;
        const auto v = velocity_field(plan, cost, i);
        std::vector<std::size_t> order(atoms.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
        result.u[i].assign(atoms.size(), 0.0);
        for (std::size_t k = 1; k < order.size(); ++k) {
            const std::size_t a = order[k - 1], b = order[k];
            result.u[i][b] = result.u[i][a] + 0.5 * (v[a] + v[b]) * (atoms[b] - atoms[a]);
        }
    }
    c_conjugate(result.u, l - 1, table, sizes);
    result.duality_gap = primal - dual_value(result.u, plan);

    double previous = std::numeric_limits<double>::infinity();
    while (result.duality_gap > kGapTarget && result.sweeps < kMaxSweeps) {
        for (std::size_t i = 0; i < l; ++i) {
            c_conjugate(result.u, i, table, sizes);
        }
        ++result.sweeps;
        result.duality_gap = primal - dual_value(result.u, plan);
        if (previous - result.duality_gap < 1e-15) {
            break;  // coordinate ascent stalled
        }
        previous = result.duality_gap;
    }
    if (result.duality_gap > kGapTarget &&
        static_cast<double>(l) * tuple_count(sizes) <= kLpCapacity) {
        result.u = solve_with_duals(plan.marginals, cost).duals;
        for (std::size_t i = 0; i < l; ++i) {
            c_conjugate(result.u, i, table, sizes);
        }
        ++result.sweeps;
        result.duality_gap = primal - dual_value(result.u, plan);
    }
    if (result.duality_gap > kGapTarget) {
        throw NumericalFailure("Kantorovich potentials did not reach the duality-gap target",
                               result.duality_gap);
    }
    const double shift = result.u[0].front();
    for (double& v : result.u[0]) {
        v -= shift;
    }
    for (double& v : result.u[l - 1]) {
        v += shift;
    }
    return result;
}

double dual_violation(const KantorovichPotentials& p, const MultiMarginalPlan& plan, const CostFunction& cost) {
    const auto sizes = marginal_sizes(plan.marginals);
    const auto table = tabulate_cost(plan, cost);
    double worst = 0.0;
    TupleCounter counter(sizes);
    std::size_t t = 0;
    do {
        double s = -table[t++];
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            s += p.u[i][counter.index()[i]];
        }
        worst = std::max(worst, s);
    } while (counter.next());
    return worst;
}

double support_slack(const KantorovichPotentials& p, const MultiMarginalPlan& plan, const CostFunction& cost) {
    double worst = 0.0;
    for (const auto& atom : plan.support) {
        double s = -cost.evaluate(plan.point(atom));
        for (std::size_t i = 0; i < atom.index.size(); ++i) {
            s += p.u[i][atom.index[i]];
        }
        worst = std::max(worst, std::abs(s));
    }
    return worst;
}

ParticleDensity displacement_interpolate(const ParticleDensity& rho0, const ParticleDensity& rho1, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("interpolation time must lie in [0, 1], got " + std::to_string(t));
    }
    if (rho0.size() != rho1.size() || !(rho0.domain() == rho1.domain())) {
        throw InvalidInput("interpolation endpoints must share N and domain");
    }
    if (t == 0.0) {
        return rho0;
    }
    if (t == 1.0) {
        return rho1;
    }
    const Domain& d = rho0.domain();
    std::vector<double> x(rho0.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        x[j] = std::clamp((1.0 - t) * rho0[j] + t * rho1[j], d.lower, d.upper);
        if (j > 0) {
            x[j] = std::max(x[j], x[j - 1]);
        }
    }
    return ParticleDensity(d, std::move(x));
}

ConvexityReport convexity_probe(const CostFunction& cost, std::span<const ParticleDensity> start,
                                std::span<const ParticleDensity> end, std::span<const double> t_samples) {
    const std::size_t l = cost.arity();
    if (start.size() != l || end.size() != l) {
        throw InvalidInput("convexity_probe endpoints must be l-tuples");
    }
    require_shared_n(start);
    require_shared_n(end);
    const std::size_t n = start.front().size();
    const bool use_lp = !cost.comonotone_certified() &&
                        static_cast<double>(l) * std::pow(static_cast<double>(n), static_cast<double>(l)) <= kLpCapacity;
    auto value = [&](std::span<const ParticleDensity> tuple) {
        if (use_lp) {
            std::vector<DiscreteMeasure> m(tuple.begin(), tuple.end());
            return lp_solve_mm(m, cost).cost_value;
        }
        return monotone_plan(tuple, cost).cost_value;
    };
    ConvexityReport report;
    report.advisory_only = !cost.comonotone_certified();
    const double w0 = value(start);
    const double w1 = value(end);
    for (double t : t_samples) {
        std::vector<ParticleDensity> mid;
        mid.reserve(l);
        for (std::size_t i = 0; i < l; ++i) {
            mid.push_back(displacement_interpolate(start[i], end[i], t));
        }
        const double wt = value(mid);
        report.t.push_back(t);
        report.value.push_back(wt);
        report.max_violation = std::max(report.max_violation, wt - (1.0 - t) * w0 - t * w1);
    }
    return report;
}

}  // namespace mmflow
