#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pmlsh/data.hpp"
#include "pmlsh/pmtree.hpp"
#include "pmlsh/projection.hpp"

namespace pmlsh {

struct PairResult {
    std::vector<PairNeighbor> pairs;  // ascending distance, id1 < id2
    std::size_t verified = 0;         // original-space pair verifications
};

// Calibrated ratio gamma = prob-quantile of R_LCA / ||o1',o2'|| over the
// pairs of a sampled, freshly indexed subset. Drives the filtering radius
// R = gamma * t * ub.
struct GammaCalibration {
    double gamma = 0.0;
    double prob = 0.85;
    std::size_t sample_size = 0;
    std::size_t pairs_used = 0;
    std::vector<float> sample;  // retained gamma values (capped subsample)
};

GammaCalibration calibrate_gamma(const Dataset& dataset, const HashFamily& family,
                                 std::size_t capacity, double prob, std::size_t sample,
                                 std::uint64_t seed,
                                 PromotePolicy policy = PromotePolicy::kMRad,
                                 std::size_t pivot_count = 5);

// Verifies every intra-leaf pair in the original space. ub is the k-th
// smallest verified distance (infinity when fewer than k pairs exist).
struct SelfJoinResult {
    std::vector<PairNeighbor> best;  // up to k pairs, ascending
    double ub = 0.0;
    std::size_t verified = 0;
};

SelfJoinResult leaf_self_join(const PMTree& tree, const Dataset& dataset, std::size_t k);

// Algorithm 3: exact T smallest projected-distance pairs by best-first
// search over node pairs, then original-space verification, top-k returned.
PairResult cp_branch_and_bound(const PMTree& tree, const Dataset& dataset, std::size_t k,
                               std::size_t T);

struct CpFilterStats {
    std::size_t self_join_verified = 0;
    std::size_t filter_admitted = 0;
    std::size_t lca_nodes = 0;
    bool budget_hit = false;
};

// Algorithm 4 + FindLCA: self-join seeds ub, nodes with radius below
// gamma*t*ub are scanned in ascending radius order, cross-leaf pairs within
// projected distance t*ub are verified until the T_cp budget is exhausted.
PairResult cp_radius_filter(const PMTree& tree, const Dataset& dataset, std::size_t k,
                            const QueryParams& params, const GammaCalibration& gamma,
                            CpFilterStats* stats = nullptr);

// Every unordered pair of points under `node` whose members sit in
// different leaves, streamed exactly once. The callback returns false to
// stop early.
void enumerate_subtree_cross_pairs(
    const PMTree& tree, std::uint32_t node,
    const std::function<bool(const LeafEntry&, const LeafEntry&)>& fn);

}  // namespace pmlsh
