#include "mmflow/cost.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mmflow/errors.hpp"

namespace mmflow {

namespace {

void require_arity(std::span<const double> x, std::size_t arity) {
    if (x.size() != arity) {
        throw InvalidInput("cost of arity " + std::to_string(arity) + " evaluated at " +
                           std::to_string(x.size()) + " coordinates");
    }
}

std::vector<double> random_point(std::mt19937_64& rng, const Domain& d, std::size_t arity) {
    std::uniform_real_distribution<double> u(d.lower, d.upper);
    std::vector<double> x(arity);
    for (double& v : x) {
        v = u(rng);
    }
    return x;
}

}  // namespace

CostFunction CostFunction::zero(Domain domain, std::size_t arity) {
    if (arity < 2) {
        throw InvalidInput("cost arity must be at least 2");
    }
    CostFunction c;
    c.name_ = "zero";
    c.domain_ = domain;
    c.arity_ = arity;
    c.evaluate_ = [](std::span<const double>) { return 0.0; };
    c.partial_ = [](std::size_t, std::span<const double>) { return 0.0; };
    c.delta_ = [](std::size_t, std::span<const double>, double) { return 0.0; };
    c.partial_bounds_.assign(arity, 0.0);
    c.comonotone_ = true;
    c.convex_each_ = true;
    c.zero_ = true;
    return c;
}

CostFunction CostFunction::quadratic_pairwise(Domain domain) {
    CostFunction c;
    c.name_ = "quadratic_pairwise";
    c.domain_ = domain;
    c.arity_ = 2;
    c.evaluate_ = [](std::span<const double> x) {
        const double d = x[0] - x[1];
        return d * d;
    };
    c.partial_ = [](std::size_t i, std::span<const double> x) {
        return i == 0 ? 2.0 * (x[0] - x[1]) : 2.0 * (x[1] - x[0]);
    };
    c.delta_ = [](std::size_t i, std::span<const double> x, double to) {
        const double other = x[1 - i];
        return (to - x[i]) * (to + x[i] - 2.0 * other);
    };
    c.partial_bounds_.assign(2, 2.0 * domain.length());
    c.comonotone_ = true;
    c.convex_each_ = true;
    return c;
}

CostFunction CostFunction::barycenter(Domain domain, std::vector<double> weights, std::size_t center) {
    if (weights.empty()) {
        throw InvalidInput("barycenter cost needs at least one weight");
    }
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw InvalidInput("barycenter weights must be positive");
        }
    }
    const std::size_t arity = weights.size() + 1;
    if (center >= arity) {
        throw InvalidInput("barycenter center index " + std::to_string(center) + " out of range");
    }
    CostFunction c;
    c.name_ = "barycenter";
    c.domain_ = domain;
    c.arity_ = arity;
    c.weights_ = weights;
    c.center_ = center;
    // Weight attached to coordinate k != center.
    auto weight_of = [weights, center](std::size_t k) { return weights[k < center ? k : k - 1]; };
    c.evaluate_ = [weight_of, center](std::span<const double> x) {
        double sum = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (k != center) {
                const double d = x[center] - x[k];
                sum += weight_of(k) * d * d;
            }
        }
        return sum;
    };
    c.partial_ = [weight_of, center](std::size_t i, std::span<const double> x) {
        if (i == center) {
            double sum = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                if (k != center) {
                    sum += 2.0 * weight_of(k) * (x[center] - x[k]);
                }
            }
            return sum;
        }
        return 2.0 * weight_of(i) * (x[i] - x[center]);
    };
    c.delta_ = [weight_of, center](std::size_t i, std::span<const double> x, double to) {
        if (i == center) {
            double sum = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                if (k != center) {
                    sum += weight_of(k) * (to - x[i]) * (to + x[i] - 2.0 * x[k]);
                }
            }
            return sum;
        }
        return weight_of(i) * (x[i] - to) * (2.0 * x[center] - to - x[i]);
    };
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    c.partial_bounds_.resize(arity);
    for (std::size_t k = 0; k < arity; ++k) {
        c.partial_bounds_[k] = 2.0 * domain.length() * (k == center ? total : weight_of(k));
    }
    c.comonotone_ = true;
    c.convex_each_ = true;
    return c;
}

CostFunction CostFunction::custom(std::string name, Domain domain, std::size_t arity, Evaluate evaluate,
                                  Partial partial, std::vector<double> partial_bounds,
                                  bool convex_in_each_coordinate) {
    if (arity < 2) {
        throw InvalidInput("cost arity must be at least 2");
    }
    if (!evaluate || !partial) {
        throw InvalidInput("custom cost needs evaluate and partial callables");
    }
    if (!partial_bounds.empty() && partial_bounds.size() != arity) {
        throw InvalidInput("custom cost needs one partial bound per coordinate");
    }
    CostFunction c;
    c.name_ = std::move(name);
    c.domain_ = domain;
    c.arity_ = arity;
    c.evaluate_ = std::move(evaluate);
    c.partial_ = std::move(partial);
    c.convex_each_ = convex_in_each_coordinate;
    if (partial_bounds.empty()) {
        partial_bounds.assign(arity, 0.0);
        std::mt19937_64 rng(0xb0b);
        for (int s = 0; s < 10000; ++s) {
            const auto x = random_point(rng, domain, arity);
            for (std::size_t i = 0; i < arity; ++i) {
                partial_bounds[i] = std::max(partial_bounds[i], std::abs(c.partial_(i, x)));
            }
        }
    }
    c.partial_bounds_ = std::move(partial_bounds);
    c.comonotone_ = certify_comonotone(c).certified;
    return c;
}

double CostFunction::evaluate(std::span<const double> x) const {
    require_arity(x, arity_);
    return evaluate_(x);
}

double CostFunction::partial(std::size_t i, std::span<const double> x) const {
    require_arity(x, arity_);
    if (i >= arity_) {
        throw InvalidInput("partial index " + std::to_string(i) + " out of range");
    }
    return partial_(i, x);
}

double CostFunction::delta(std::size_t i, std::span<const double> x, double to) const {
    require_arity(x, arity_);
    if (delta_) {
        return delta_(i, x, to);
    }
    std::vector<double> y(x.begin(), x.end());
    y[i] = to;
    return evaluate_(y) - evaluate_(x);
}

double CostFunction::partial_bound(std::size_t i) const {
    if (i >= arity_) {
        throw InvalidInput("partial index " + std::to_string(i) + " out of range");
    }
    return partial_bounds_[i];
}

double CostFunction::max_partial_bound() const {
    return *std::max_element(partial_bounds_.begin(), partial_bounds_.end());
}

bool operator==(const CostFunction& a, const CostFunction& b) {
    return a.name_ == b.name_ && a.domain_ == b.domain_ && a.arity_ == b.arity_ &&
           a.weights_ == b.weights_ && a.center_ == b.center_;
}

ComonotoneProbe certify_comonotone(const CostFunction& cost, std::size_t samples, std::uint64_t seed) {
    ComonotoneProbe report;
    const std::size_t l = cost.arity();
    const Domain& d = cost.domain();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> coord(0, l - 1);
    for (std::size_t s = 0; s < samples; ++s) {
        auto x = random_point(rng, d, l);
        const std::size_t i = coord(rng);
        std::size_t j = coord(rng);
        while (j == i) {
            j = coord(rng);
        }
        // Increments keep x + a e_i and x + b e_j inside the domain.
        const double a = (d.upper - x[i]) * unit(rng);
        const double b = (d.upper - x[j]) * unit(rng);
        std::vector<double> xi = x, xj = x, xij = x;
        xi[i] += a;
        xj[j] += b;
        xij[i] += a;
        xij[j] += b;
        const double c00 = cost.evaluate(x);
        const double c10 = cost.evaluate(xi);
        const double c01 = cost.evaluate(xj);
        const double c11 = cost.evaluate(xij);
        const double scale = std::max({1.0, std::abs(c00), std::abs(c10), std::abs(c01), std::abs(c11)});
        const double mixed = (c11 - c10 - c01 + c00) / scale;
        report.worst_mixed_difference = std::max(report.worst_mixed_difference, mixed);
    }
    report.certified = report.worst_mixed_difference <= 1e-10;
    return report;
}

}  // namespace mmflow
