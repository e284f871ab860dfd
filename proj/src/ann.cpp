#include "pmlsh/ann.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pmlsh/rng.hpp"

namespace pmlsh {

DistanceDistribution DistanceDistribution::from_points(const double* values, std::size_t n,
                                                       std::size_t dim,
                                                       std::size_t sample_pairs,
                                                       std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("DistanceDistribution: need at least 2 points");
    DistanceDistribution dd;
    const std::size_t total = n * (n - 1) / 2;
    auto row = [&](std::size_t i) { return std::span<const double>(values + i * dim, dim); };
    if (sample_pairs >= total) {
        dd.sample_.reserve(total);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                dd.sample_.push_back(euclidean(row(i), row(j)));
            }
        }
    } else {
        Rng rng(seed);
        dd.sample_.reserve(sample_pairs);
        for (std::size_t t = 0; t < sample_pairs; ++t) {
            const std::size_t i = rng.uniform_u64(n);
            std::size_t j = rng.uniform_u64(n - 1);
            if (j >= i) ++j;
            dd.sample_.push_back(euclidean(row(i), row(j)));
        }
    }
    std::sort(dd.sample_.begin(), dd.sample_.end());
    return dd;
}

DistanceDistribution DistanceDistribution::from_dataset(const Dataset& ds,
                                                        std::size_t sample_pairs,
                                                        std::uint64_t seed) {
    return from_points(ds.values.data(), ds.n, ds.d, sample_pairs, seed);
}

double DistanceDistribution::eval(double x) const {
    const auto it = std::upper_bound(sample_.begin(), sample_.end(), x);
    return static_cast<double>(it - sample_.begin()) / static_cast<double>(sample_.size());
}

double DistanceDistribution::quantile(double p) const {
    if (p <= 0.0) return sample_.front();
    if (p >= 1.0) return sample_.back();
    const double pos = p * static_cast<double>(sample_.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sample_.size()) return sample_.back();
    return sample_[lo] * (1.0 - frac) + sample_[lo + 1] * frac;
}

double select_rmin(const DistanceDistribution& F, const QueryParams& params, std::size_t n,
                   std::size_t k, double shrink) {
    const double target =
        (params.beta * static_cast<double>(n) + static_cast<double>(k)) /
        static_cast<double>(n);
    if (target >= 1.0) return F.max_distance();
    const double r = F.quantile(target);
    return shrink * r;
}

std::vector<Neighbor> verify_candidates(const Dataset& dataset, std::span<const double> q,
                                        std::span<const PointId> ids) {
    std::vector<Neighbor> out;
    out.reserve(ids.size());
    for (PointId id : ids) {
        if (id >= dataset.n) throw std::invalid_argument("verify_candidates: unknown id");
        out.push_back({id, euclidean(dataset.row(id), q)});
    }
    return out;
}

std::optional<Neighbor> AnnSearcher::bc_query(std::span<const double> q, double r) const {
    if (!(r > 0.0)) throw std::invalid_argument("bc_query: r must be positive");
    std::vector<double> qp(family_.num_hashes());
    family_.project_into(q, qp);

    // |C| >= beta*n + 1 must certify the batch case, so stop at ceil(beta*n)+1.
    const std::size_t budget =
        static_cast<std::size_t>(std::ceil(params_.beta * static_cast<double>(params_.n))) + 1;
    const auto hits = tree_.range_query(qp, params_.t * r, budget);
    if (hits.empty()) return std::nullopt;

    Neighbor best{0, std::numeric_limits<double>::infinity()};
    for (const auto& h : hits) {
        const double d = euclidean(dataset_.row(h.id), q);
        if (d < best.dist || (d == best.dist && h.id < best.id)) best = {h.id, d};
    }
    if (hits.size() >= budget) return best;
    if (best.dist <= params_.c * r) return best;
    return std::nullopt;
}

AnnResult AnnSearcher::ann_query(std::span<const double> q, std::size_t k,
                                 double r_min) const {
    if (k == 0) throw std::invalid_argument("ann_query: k must be >= 1");
    if (!(r_min > 0.0)) throw std::invalid_argument("ann_query: r_min must be positive");

    AnnResult res;
    const std::size_t n = tree_.size();
    const std::size_t want = std::min(k, n);
    std::vector<double> qp(family_.num_hashes());
    family_.project_into(q, qp);

    RangeScan scan(tree_, qp);
    const std::size_t budget = params_.t_nn;  // ceil(beta*n) + k
    std::vector<Neighbor> candidates;         // verified, unordered
    std::size_t scanned = 0;                  // hits already verified

    double r = r_min;
    while (true) {
        // Candidates from earlier rounds count against the enlarged c*r.
        std::size_t within = 0;
        for (const auto& cand : candidates) {
            if (cand.dist <= params_.c * r) ++within;
        }
        if (within >= want) break;

        scan.extend(params_.t * r, budget);
        const auto& hits = scan.results();
        for (; scanned < hits.size(); ++scanned) {
            const PointId id = hits[scanned].id;
            candidates.push_back({id, euclidean(dataset_.row(id), q)});
            ++res.probes;
        }
        if (candidates.size() >= budget) break;
        if (scan.exhausted() && candidates.size() == n) break;
        r *= params_.c;
        ++res.rounds;
    }

    std::sort(candidates.begin(), candidates.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
    });
    if (candidates.size() > want) candidates.resize(want);
    res.neighbors = std::move(candidates);
    return res;
}

}  // namespace pmlsh
