#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmflow/cost.hpp"
#include "mmflow/geometry.hpp"

namespace mmflow {

// Finitely supported probability measure with arbitrary atom weights.
struct DiscreteMeasure {
    std::vector<double> atoms;
    std::vector<double> weights;

    DiscreteMeasure() = default;
    // Throws InvalidInput on size mismatch, negative weights or mass != 1 (1e-12).
    DiscreteMeasure(std::vector<double> atoms, std::vector<double> weights);
    explicit DiscreteMeasure(const ParticleDensity& rho);

    std::size_t size() const noexcept { return atoms.size(); }
};

enum class PlanForm { comonotone, sparse };

struct PlanAtom {
    std::vector<std::size_t> index;  // one atom index per marginal
    double weight = 0.0;
};

/**
 * Coupling of l discrete marginals.
 *
 * The comonotone form couples the j-th quantile atoms of every marginal with
 * weight 1/N; the sparse form lists arbitrary (index-tuple, weight) entries.
 */
struct MultiMarginalPlan {
    PlanForm form = PlanForm::sparse;
    std::vector<DiscreteMeasure> marginals;
    std::vector<PlanAtom> support;
    double cost_value = 0.0;

    std::size_t arity() const noexcept { return marginals.size(); }
    // Positions (x_1, ..., x_l) of a support entry.
    std::vector<double> point(const PlanAtom& atom) const;
    // Push-forward of the plan to coordinate i, as weights per atom.
    std::vector<double> marginal_weights(std::size_t i) const;
    // sum over the support of weight * cost(point).
    double recompute_cost(const CostFunction& cost) const;
};

// Co-monotone coupling of particle densities sharing N. Throws InvalidInput
// on mismatched N or arity.
MultiMarginalPlan monotone_plan(std::span<const ParticleDensity> marginals, const CostFunction& cost);

// Multi-marginal value W_c of the co-monotone coupling with `rho` placed in
// slot i and the remaining slots taken from `frozen` (frozen[i] is ignored).
double frozen_interaction(const CostFunction& cost, std::span<const ParticleDensity> frozen, std::size_t i,
                          const ParticleDensity& rho);

// Exact optimum of the discrete multi-marginal problem by linear programming
// over all K_1 x ... x K_l index tuples. Oracle scale only: throws
// CapacityError when l * prod K_i > 1e6, InvalidInput on marginal mismatch.
MultiMarginalPlan lp_solve_mm(std::span<const DiscreteMeasure> marginals, const CostFunction& cost);

struct KantorovichPotentials {
    std::vector<std::vector<double>> u;  // u[i][a]: potential of marginal i at atom a
    double duality_gap = 0.0;           // primal cost - sum_i <weights_i, u_i>
    std::size_t sweeps = 0;
};

// Dual potentials for an optimal plan: sum_i u_i = c on the support and
// <= c everywhere else. Seeds u_i (i < l) by integrating the velocity field
// along marginal i, sets u_l to the c-conjugate of the others and runs
// c-conjugate sweeps until the gap is <= 1e-10. A stalled sweep falls back to
// LP multipliers when the problem is at oracle scale. Gauge: u_1 vanishes at
// its first atom. Throws NumericalFailure carrying the gap otherwise.
KantorovichPotentials kantorovich_potentials(const MultiMarginalPlan& plan, const CostFunction& cost);

// max over all index tuples of (sum_i u_i - c)_+.
double dual_violation(const KantorovichPotentials& p, const MultiMarginalPlan& plan, const CostFunction& cost);
// max over the plan support of |sum_i u_i - c|.
double support_slack(const KantorovichPotentials& p, const MultiMarginalPlan& plan, const CostFunction& cost);

// Velocity U_i = E[dc/dx_i | x_i] of marginal i's atoms. For comonotone
// plans entry j is dc/dx_i at the j-th support tuple.
std::vector<double> velocity_field(const MultiMarginalPlan& plan, const CostFunction& cost, std::size_t i);

// Particle-wise McCann interpolation (1 - t) x_j + t y_j. Throws DomainError
// for t outside [0, 1], InvalidInput on mismatched N or domain.
ParticleDensity displacement_interpolate(const ParticleDensity& rho0, const ParticleDensity& rho1, double t);

struct ConvexityReport {
    std::vector<double> t;
    std::vector<double> value;  // W_c along the interpolation
    double max_violation = 0.0; // max_t W_c(rho_t) - (1-t) W_c(rho_0) - t W_c(rho_1)
    bool advisory_only = false; // uncertified cost: no guarantee applies
};

// Evaluates W_c along component-wise displacement interpolation between two
// l-tuples. Certified costs use the co-monotone plan; uncertified ones use
// the LP oracle when it fits and are flagged advisory.
ConvexityReport convexity_probe(const CostFunction& cost, std::span<const ParticleDensity> start,
                                std::span<const ParticleDensity> end, std::span<const double> t_samples);

}  // namespace mmflow
