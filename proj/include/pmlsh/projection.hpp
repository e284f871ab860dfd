#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pmlsh/stats.hpp"

namespace pmlsh {

using PointId = std::uint32_t;

// A point in the m-dimensional projected space.
struct ProjectedPoint {
    PointId id = 0;
    std::vector<double> coords;
};

// m Gaussian random-projection vectors h_i(o) = a_i . o, entries i.i.d.
// standard normal. The same seed reproduces bit-identical vectors.
class HashFamily {
public:
    static HashFamily make(std::size_t dim, std::size_t num_hashes, std::uint64_t seed);

    std::size_t dim() const { return dim_; }
    std::size_t num_hashes() const { return num_hashes_; }
    std::uint64_t seed() const { return seed_; }

    // Row i (one projection vector, dim entries).
    std::span<const double> vector(std::size_t i) const {
        return {vectors_.data() + i * dim_, dim_};
    }

    ProjectedPoint project(std::span<const double> point, PointId id) const;
    void project_into(std::span<const double> point, std::span<double> out) const;

private:
    std::size_t dim_ = 0;
    std::size_t num_hashes_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> vectors_;  // row-major, num_hashes x dim
};

// Squared Euclidean distance between projected coordinate vectors.
double projected_distance_sq(std::span<const double> a, std::span<const double> b);

// Unbiased estimate of the squared original distance from projected
// coordinates: |p1' - p2'|^2 / m.
double estimate_distance_sq(const ProjectedPoint& p1, const ProjectedPoint& p2,
                            std::size_t m);

// Query constants solved from (m, c, alpha1) plus the dataset/query sizes.
// t maps an original radius r to the projected search radius t*r; alpha2 and
// beta = 2*alpha2 size the candidate budgets.
struct QueryParams {
    unsigned m = 0;
    double c = 0.0;
    double alpha1 = 0.0;
    double t = 0.0;
    double alpha2 = 0.0;
    double beta = 0.0;
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t t_nn = 0;  // ceil(beta*n) + k
    std::size_t t_cp = 0;  // ceil(alpha2*n*(n-1)) + k
};

QueryParams solve_query_params(unsigned m, double c, double alpha1, std::size_t n,
                               std::size_t k);

}  // namespace pmlsh
