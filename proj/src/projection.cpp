#include "pmlsh/projection.hpp"

#include <cmath>
#include <stdexcept>

#include "pmlsh/rng.hpp"

namespace pmlsh {

HashFamily HashFamily::make(std::size_t dim, std::size_t num_hashes, std::uint64_t seed) {
    if (dim == 0 || num_hashes == 0) {
        throw std::invalid_argument("HashFamily: dim and num_hashes must be >= 1");
    }
    HashFamily f;
    f.dim_ = dim;
    f.num_hashes_ = num_hashes;
    f.seed_ = seed;
    f.vectors_.resize(dim * num_hashes);
    Rng rng(seed);
    for (double& v : f.vectors_) v = rng.normal();
    return f;
}

void HashFamily::project_into(std::span<const double> point, std::span<double> out) const {
    if (point.size() != dim_) {
        throw std::invalid_argument("HashFamily::project: point dimension mismatch");
    }
    for (std::size_t i = 0; i < num_hashes_; ++i) {
        const double* row = vectors_.data() + i * dim_;
        double acc = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) acc += row[j] * point[j];
        out[i] = acc;
    }
}

ProjectedPoint HashFamily::project(std::span<const double> point, PointId id) const {
    ProjectedPoint p;
    p.id = id;
    p.coords.resize(num_hashes_);
    project_into(point, p.coords);
    return p;
}

double projected_distance_sq(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("projected_distance_sq: dimension mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double estimate_distance_sq(const ProjectedPoint& p1, const ProjectedPoint& p2,
                            std::size_t m) {
    if (m == 0) throw std::invalid_argument("estimate_distance_sq: m must be >= 1");
    return projected_distance_sq(p1.coords, p2.coords) / static_cast<double>(m);
}

QueryParams solve_query_params(unsigned m, double c, double alpha1, std::size_t n,
                               std::size_t k) {
    if (!(c > 1.0)) throw std::invalid_argument("solve_query_params: c must be > 1");
    if (n < 1 || k < 1) throw std::invalid_argument("solve_query_params: n, k must be >= 1");

    QueryParams p;
    p.m = m;
    p.c = c;
    p.alpha1 = alpha1;
    const double t2 = chi2_upper_quantile(alpha1, m);
    p.t = std::sqrt(t2);
    // alpha2 solves chi2_{1-alpha2}(m) = t^2 / c: an upper bound on the
    // admission probability CDF(t^2 / c^2, m) of any point beyond c*r, so
    // budgets sized from it stay conservative.
    p.alpha2 = chi2_cdf(t2 / c, m);
    p.beta = 2.0 * p.alpha2;
    const double nd = static_cast<double>(n);
    p.n = n;
    p.k = k;
    p.t_nn = static_cast<std::size_t>(std::ceil(p.beta * nd)) + k;
    p.t_cp = static_cast<std::size_t>(std::ceil(p.alpha2 * nd * (nd - 1.0))) + k;
    return p;
}

}  // namespace pmlsh
