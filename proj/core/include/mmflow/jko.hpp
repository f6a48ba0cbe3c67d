#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mmflow/cost.hpp"
#include "mmflow/energy.hpp"
#include "mmflow/geometry.hpp"
#include "mmflow/transport.hpp"

namespace mmflow {

/**
 * One semi-implicit minimizing-movement step for population i:
 *
 *   J(x) = (1/N) sum_j (x_j - x_j^k)^2
 *        + 2h [ E(x) + (1/N) sum_j c(frozen_1[j], ..., x_j, ..., frozen_l[j]) ]
 *
 * over sorted x inside the domain. `frozen` is the full step-k tuple;
 * frozen[i] is the previous state of population i.
 */
struct StepProblem {
    std::vector<ParticleDensity> frozen;
    std::size_t i = 0;
    InternalEnergy energy;
    CostFunction cost;
    double h = 0.0;

    // Throws InvalidInput unless the tuple matches the cost arity, shares N
    // and domain, h > 0 and i indexes the tuple. Non-zero energies need N >= 2.
    StepProblem(std::vector<ParticleDensity> frozen, std::size_t i, InternalEnergy energy, CostFunction cost,
                double h);

    const ParticleDensity& previous() const { return frozen[i]; }
    const Domain& domain() const { return frozen[i].domain(); }
    std::size_t size() const { return frozen[i].size(); }
};

struct SolverOptions {
    double tol = 0.0;  // 0 selects default_tolerance(N)
    std::size_t max_iterations = 100000;
};

// 1e-9 * sqrt(N).
double default_tolerance(std::size_t n);

struct StepSolution {
    ParticleDensity minimizer;
    double objective_value = 0.0;
    double objective_at_previous = 0.0;
    // J(minimizer) - J(previous), accumulated without cancellation.
    double objective_change = 0.0;
    double w2_to_previous = 0.0;
    MultiMarginalPlan plan;  // co-monotone plan with the minimizer in slot i
    double first_order_residual = 0.0;
    std::size_t iterations = 0;
    double tol = 0.0;
};

// J(x). Throws InvalidInput for wrong length, unsorted or out-of-domain x.
double objective(const StepProblem& p, std::span<const double> x);
// dJ/dx_j, same preconditions.
std::vector<double> objective_gradient(const StepProblem& p, std::span<const double> x);
// J(y) - J(x) for feasible x, y, gap by gap and particle by particle.
double objective_delta(const StepProblem& p, std::span<const double> x, std::span<const double> y);

// Euclidean projection onto {lower <= x_1 <= ... <= x_N <= upper}: pool
// adjacent violators, then clamp.
std::vector<double> project_ordered_box(std::span<const double> y, double lower, double upper);

/**
 * Minimizes J by projected gradient with Barzilai-Borwein steps and
 * nonmonotone Armijo backtracking, starting from `initial` (default: the
 * previous state). Stops when || x - Proj(x - g) ||_inf <= tol, where g is
 * the mass-normalized gradient (N/2) dJ/dx. From the warm start every
 * accepted iterate satisfies J <= J(previous).
 *
 * Throws NumericalFailure carrying the best residual at the iteration cap.
 */
StepSolution solve_step(const StepProblem& p, const SolverOptions& options = {},
                        std::optional<std::span<const double>> initial = std::nullopt);

// Per-particle residual |h (U_j + N dE/dx_j) + (x_j - x_j^k)| maximized
// over interior particles: those off the walls and not tied to a neighbour.
double euler_lagrange_residual(const StepProblem& p, const StepSolution& s);

}  // namespace mmflow
