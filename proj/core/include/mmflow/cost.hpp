#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmflow/geometry.hpp"

namespace mmflow {

/**
 * Multi-marginal cost c(x_1, ..., x_l) over the domain power Omega^l.
 *
 * Besides evaluation a cost carries per-coordinate sup-norm bounds on its
 * partial derivatives and a comonotonicity certificate: true when every
 * mixed second derivative d^2 c / dx_i dx_j (i != j) is nonpositive, which
 * makes the co-monotone coupling optimal.
 */
class CostFunction {
public:
    using Evaluate = std::function<double(std::span<const double>)>;
    using Partial = std::function<double(std::size_t, std::span<const double>)>;
    // c(x with coordinate i replaced by `to`) - c(x); optional accuracy hook.
    using Delta = std::function<double(std::size_t, std::span<const double>, double)>;

    // c = 0 on Omega^arity.
    static CostFunction zero(Domain domain, std::size_t arity);
    // c(x, y) = |x - y|^2.
    static CostFunction quadratic_pairwise(Domain domain);
    // c(x) = sum_{j != center} w_j |x_center - x_j|^2 with l = weights.size() + 1;
    // weights are listed for the non-center coordinates in increasing order.
    static CostFunction barycenter(Domain domain, std::vector<double> weights, std::size_t center = 0);
    // User cost. Empty partial_bounds are estimated by sampling. The
    // comonotone certificate is decided by certify_comonotone.
    static CostFunction custom(std::string name, Domain domain, std::size_t arity, Evaluate evaluate,
                               Partial partial, std::vector<double> partial_bounds = {},
                               bool convex_in_each_coordinate = false);

    const std::string& name() const noexcept { return name_; }
    const Domain& domain() const noexcept { return domain_; }
    std::size_t arity() const noexcept { return arity_; }
    // Barycenter weights (empty for other kinds) and center coordinate.
    const std::vector<double>& weights() const noexcept { return weights_; }
    std::size_t center() const noexcept { return center_; }

    double evaluate(std::span<const double> x) const;
    double partial(std::size_t i, std::span<const double> x) const;
    double delta(std::size_t i, std::span<const double> x, double to) const;
    // sup over Omega^l of |dc/dx_i|.
    double partial_bound(std::size_t i) const;
    double max_partial_bound() const;
    bool comonotone_certified() const noexcept { return comonotone_; }
    // d^2 c / dx_i^2 >= 0 for every i; required for the uniqueness witness.
    bool convex_in_each_coordinate() const noexcept { return convex_each_; }
    bool is_zero() const noexcept { return zero_; }

    friend bool operator==(const CostFunction& a, const CostFunction& b);

private:
    CostFunction() = default;

    std::string name_;
    Domain domain_;
    std::size_t arity_ = 0;
    std::vector<double> weights_;
    std::size_t center_ = 0;
    Evaluate evaluate_;
    Partial partial_;
    Delta delta_;
    std::vector<double> partial_bounds_;
    bool comonotone_ = false;
    bool convex_each_ = false;
    bool zero_ = false;
};

struct ComonotoneProbe {
    bool certified = true;
    // Largest mixed second difference seen, scaled by max(1, |c|).
    double worst_mixed_difference = 0.0;
};

// Samples mixed second differences
//   c(x + a e_i + b e_j) - c(x + a e_i) - c(x + b e_j) + c(x)
// with a, b > 0 at random points and pairs; certified iff all are <= 1e-10.
ComonotoneProbe certify_comonotone(const CostFunction& cost, std::size_t samples = 10000,
                                   std::uint64_t seed = 0x5eed);

}  // namespace mmflow
