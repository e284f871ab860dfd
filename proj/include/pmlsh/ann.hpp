#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pmlsh/data.hpp"
#include "pmlsh/pmtree.hpp"
#include "pmlsh/projection.hpp"

namespace pmlsh {

// Empirical distance distribution F(x) = fraction of sampled pair distances
// <= x, with interpolated quantiles. Space-agnostic: build it over original
// vectors for radius selection, over projected ones for the cost model.
class DistanceDistribution {
public:
    static DistanceDistribution from_dataset(const Dataset& ds, std::size_t sample_pairs,
                                             std::uint64_t seed);
    static DistanceDistribution from_points(const double* values, std::size_t n,
                                            std::size_t dim, std::size_t sample_pairs,
                                            std::uint64_t seed);

    double eval(double x) const;          // F(x), 0 below support, 1 above
    double quantile(double p) const;      // F^{-1}(p) by linear interpolation
    double max_distance() const { return sample_.back(); }
    std::size_t sample_size() const { return sample_.size(); }

private:
    std::vector<double> sample_;  // sorted
};

// r with n*F(r) = beta*n + k, shrunk slightly so the first range query does
// not overshoot; clamps to the max sampled distance when beta*n + k >= n.
double select_rmin(const DistanceDistribution& F, const QueryParams& params, std::size_t n,
                   std::size_t k, double shrink = 0.9);

struct AnnResult {
    std::vector<Neighbor> neighbors;  // ascending distance, ties by id
    std::size_t probes = 0;           // original-space verifications
    std::size_t rounds = 0;           // radius enlargements
};

// Query engines over a frozen tree/family/dataset triple. Read-only and
// safe for concurrent use from multiple threads.
class AnnSearcher {
public:
    AnnSearcher(const PMTree& tree, const HashFamily& family, const Dataset& dataset,
                QueryParams params)
        : tree_(tree), family_(family), dataset_(dataset), params_(params) {}

    // Algorithm 1: one range query at projected radius t*r; a point within
    // c*r (or the closest of a full candidate batch) or nothing.
    std::optional<Neighbor> bc_query(std::span<const double> q, double r) const;

    // Algorithm 2: radius sequence r_min * c^i with a cumulative frontier.
    AnnResult ann_query(std::span<const double> q, std::size_t k, double r_min) const;

    const QueryParams& params() const { return params_; }

private:
    const PMTree& tree_;
    const HashFamily& family_;
    const Dataset& dataset_;
    QueryParams params_;
};

// Exact original-space distances for a candidate id list, each id once.
std::vector<Neighbor> verify_candidates(const Dataset& dataset, std::span<const double> q,
                                        std::span<const PointId> ids);

}  // namespace pmlsh
