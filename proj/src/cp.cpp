#include "pmlsh/cp.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "pmlsh/rng.hpp"

namespace pmlsh {

namespace {

double proj_dist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        acc += t * t;
    }
    return std::sqrt(acc);
}

bool pair_less(const PairNeighbor& a, const PairNeighbor& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.id1 != b.id1) return a.id1 < b.id1;
    return a.id2 < b.id2;
}

PairNeighbor make_pair_neighbor(PointId a, PointId b, double dist) {
    if (a > b) std::swap(a, b);
    return {a, b, dist};
}

// Bounded best-k collector over pairs (max-heap on the comparison above).
class TopPairs {
public:
    explicit TopPairs(std::size_t k) : k_(k) {}

    void offer(const PairNeighbor& p) {
        if (heap_.size() < k_) {
            heap_.push(p);
        } else if (k_ > 0 && pair_less(p, heap_.top())) {
            heap_.pop();
            heap_.push(p);
        }
    }

    bool full() const { return heap_.size() >= k_; }
    // k-th best distance so far; infinity until k pairs are present.
    double bound() const {
        return full() && k_ > 0 ? heap_.top().dist : std::numeric_limits<double>::infinity();
    }

    std::vector<PairNeighbor> sorted() const {
        auto copy = heap_;
        std::vector<PairNeighbor> out(copy.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = copy.top();
            copy.pop();
        }
        return out;
    }

private:
    std::size_t k_;
    std::priority_queue<PairNeighbor, std::vector<PairNeighbor>, decltype(&pair_less)> heap_{
        &pair_less};
};

}  // namespace

GammaCalibration calibrate_gamma(const Dataset& dataset, const HashFamily& family,
                                 std::size_t capacity, double prob, std::size_t sample,
                                 std::uint64_t seed, PromotePolicy policy,
                                 std::size_t pivot_count) {
    if (sample < 2) throw std::invalid_argument("calibrate_gamma: sample must be >= 2");
    if (!(prob > 0.0 && prob < 1.0)) {
        throw std::invalid_argument("calibrate_gamma: prob outside (0,1)");
    }
    const std::size_t n = std::min(sample, dataset.n);

    // Sample without replacement (partial Fisher-Yates), project, index.
    Rng rng(seed);
    std::vector<std::size_t> idx(dataset.n);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform_u64(dataset.n - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<ProjectedPoint> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        pts.push_back(family.project(dataset.row(idx[i]),
                                     static_cast<PointId>(i)));
    }
    PivotSet pivots = select_pivots(pts, std::min(pivot_count, pts.size()), seed);
    PMTree tree = PMTree::build(pts, pivots, {capacity, policy, seed});

    // gamma of a pair = radius of its LCA node / projected distance. Pairs
    // split across children of node X have LCA X; intra-leaf pairs use the
    // leaf's routing-entry radius; the root uses its virtual cover radius.
    std::vector<float> gammas;
    gammas.reserve(n * (n - 1) / 2);
    std::vector<std::vector<const LeafEntry*>> child_points;

    auto emit_cross = [&](double radius, const std::vector<const LeafEntry*>& a,
                          const std::vector<const LeafEntry*>& b) {
        for (const LeafEntry* pa : a) {
            for (const LeafEntry* pb : b) {
                const double d = proj_dist(pa->coords, pb->coords);
                if (d > 0.0) gammas.push_back(static_cast<float>(radius / d));
            }
        }
    };

    auto visit = [&](auto&& self, std::uint32_t id, double radius,
                     std::vector<const LeafEntry*>& mine) -> void {
        const Node& node = tree.node(id);
        if (node.leaf) {
            mine.reserve(node.points.size());
            for (const auto& p : node.points) mine.push_back(&p);
            for (std::size_t i = 0; i + 1 < mine.size(); ++i) {
                for (std::size_t j = i + 1; j < mine.size(); ++j) {
                    const double d = proj_dist(mine[i]->coords, mine[j]->coords);
                    if (d > 0.0) gammas.push_back(static_cast<float>(radius / d));
                }
            }
            return;
        }
        std::vector<std::vector<const LeafEntry*>> kids(node.routes.size());
        for (std::size_t c = 0; c < node.routes.size(); ++c) {
            self(self, node.routes[c].child, node.routes[c].radius, kids[c]);
        }
        for (std::size_t a = 0; a + 1 < kids.size(); ++a) {
            for (std::size_t b = a + 1; b < kids.size(); ++b) {
                emit_cross(radius, kids[a], kids[b]);
            }
        }
        for (auto& kid : kids) {
            mine.insert(mine.end(), kid.begin(), kid.end());
        }
    };

    GammaCalibration cal;
    cal.prob = prob;
    cal.sample_size = n;
    if (tree.root() != kNullNode) {
        std::vector<const LeafEntry*> all;
        visit(visit, tree.root(), tree.root_cover_radius(), all);
    }
    cal.pairs_used = gammas.size();
    if (gammas.empty()) throw std::invalid_argument("calibrate_gamma: no usable pairs");

    const auto pos = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(gammas.size() - 1),
                         prob * static_cast<double>(gammas.size())));
    std::nth_element(gammas.begin(), gammas.begin() + static_cast<std::ptrdiff_t>(pos),
                     gammas.end());
    cal.gamma = static_cast<double>(gammas[pos]);

    constexpr std::size_t kRetainCap = 1u << 20;
    if (gammas.size() <= kRetainCap) {
        cal.sample = std::move(gammas);
    } else {
        const std::size_t stride = (gammas.size() + kRetainCap - 1) / kRetainCap;
        for (std::size_t i = 0; i < gammas.size(); i += stride) cal.sample.push_back(gammas[i]);
    }
    return cal;
}

SelfJoinResult leaf_self_join(const PMTree& tree, const Dataset& dataset, std::size_t k) {
    if (tree.size() == 0) throw std::invalid_argument("leaf_self_join: empty tree");
    SelfJoinResult res;
    TopPairs top(k);
    std::vector<std::uint32_t> leaves;
    tree.collect_leaves(tree.root(), leaves);
    for (std::uint32_t leaf : leaves) {
        const auto& pts = tree.node(leaf).points;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double d = euclidean(dataset.row(pts[i].id), dataset.row(pts[j].id));
                top.offer(make_pair_neighbor(pts[i].id, pts[j].id, d));
                ++res.verified;
            }
        }
    }
    res.best = top.sorted();
    res.ub = top.bound();
    return res;
}

PairResult cp_branch_and_bound(const PMTree& tree, const Dataset& dataset, std::size_t k,
                               std::size_t T) {
    const std::size_t n = tree.size();
    if (n < 2) throw std::invalid_argument("cp_branch_and_bound: need at least 2 points");
    const std::size_t total = n * (n - 1) / 2;
    if (k > T || T > total) {
        throw std::invalid_argument("cp_branch_and_bound: need k <= T <= n(n-1)/2");
    }

    // Best-first over node pairs by Mindist; d_T is the current T-th
    // smallest projected pair distance.
    TopPairs top(T);  // projected-space candidates
    struct QItem {
        double lb;
        std::uint64_t seq;
        std::uint32_t a, b;
    };
    auto order = [](const QItem& x, const QItem& y) {
        if (x.lb != y.lb) return x.lb > y.lb;
        return x.seq > y.seq;
    };
    std::priority_queue<QItem, std::vector<QItem>, decltype(order)> pq(order);
    std::uint64_t seq = 0;
    pq.push({0.0, seq++, tree.root(), tree.root()});

    auto scan_leaf_pair = [&](const Node& na, const Node& nb, bool same) {
        for (std::size_t i = 0; i < na.points.size(); ++i) {
            const std::size_t jstart = same ? i + 1 : 0;
            for (std::size_t j = jstart; j < nb.points.size(); ++j) {
                const double d = proj_dist(na.points[i].coords, nb.points[j].coords);
                top.offer(make_pair_neighbor(na.points[i].id, nb.points[j].id, d));
            }
        }
    };

    while (!pq.empty()) {
        const QItem item = pq.top();
        pq.pop();
        if (item.lb > top.bound()) break;
        const Node& na = tree.node(item.a);
        const Node& nb = tree.node(item.b);
        if (na.leaf) {
            scan_leaf_pair(na, nb, item.a == item.b);
            continue;
        }
        if (item.a == item.b) {
            for (std::size_t i = 0; i < na.routes.size(); ++i) {
                for (std::size_t j = i; j < na.routes.size(); ++j) {
                    const double lb =
                        i == j ? 0.0 : mindist(na.routes[i], na.routes[j]);
                    if (lb <= top.bound()) {
                        pq.push({lb, seq++, na.routes[i].child, na.routes[j].child});
                    }
                }
            }
        } else {
            for (const auto& ea : na.routes) {
                for (const auto& eb : nb.routes) {
                    const double lb = mindist(ea, eb);
                    if (lb <= top.bound()) pq.push({lb, seq++, ea.child, eb.child});
                }
            }
        }
    }

    // Verify the projected candidates in the original space.
    PairResult res;
    TopPairs best(k);
    for (const auto& cand : top.sorted()) {
        const double d = euclidean(dataset.row(cand.id1), dataset.row(cand.id2));
        best.offer({cand.id1, cand.id2, d});
        ++res.verified;
    }
    res.pairs = best.sorted();
    return res;
}

void enumerate_subtree_cross_pairs(
    const PMTree& tree, std::uint32_t node,
    const std::function<bool(const LeafEntry&, const LeafEntry&)>& fn) {
    std::vector<std::uint32_t> leaves;
    tree.collect_leaves(node, leaves);
    for (std::size_t a = 0; a + 1 < leaves.size(); ++a) {
        const auto& pa = tree.node(leaves[a]).points;
        for (std::size_t b = a + 1; b < leaves.size(); ++b) {
            const auto& pb = tree.node(leaves[b]).points;
            for (const LeafEntry& x : pa) {
                for (const LeafEntry& y : pb) {
                    if (!fn(x, y)) return;
                }
            }
        }
    }
}

PairResult cp_radius_filter(const PMTree& tree, const Dataset& dataset, std::size_t k,
                            const QueryParams& params, const GammaCalibration& gamma,
                            CpFilterStats* stats) {
    if (k == 0) throw std::invalid_argument("cp_radius_filter: k must be >= 1");
    CpFilterStats local;
    SelfJoinResult seed = leaf_self_join(tree, dataset, k);
    local.self_join_verified = seed.verified;

    TopPairs top(k);
    for (const auto& p : seed.best) top.offer(p);
    std::size_t count = seed.verified;
    const std::size_t T = params.t_cp;

    double ub = seed.ub;
    double R;
    if (std::isinf(ub)) {
        // Fewer than k intra-leaf pairs exist; clamp so FindLCA covers the
        // whole tree's maximal inner nodes.
        R = tree.root_cover_radius();
    } else {
        R = gamma.gamma * params.t * ub;
    }

    auto lca = tree.find_lca_nodes(R);
    std::sort(lca.begin(), lca.end(), [](const LcaNode& a, const LcaNode& b) {
        if (a.radius != b.radius) return a.radius < b.radius;
        if (a.subtree_points != b.subtree_points) return a.subtree_points < b.subtree_points;
        return a.node < b.node;
    });
    local.lca_nodes = lca.size();

    for (const auto& ln : lca) {
        if (count > T) break;
        enumerate_subtree_cross_pairs(
            tree, ln.node, [&](const LeafEntry& x, const LeafEntry& y) {
                const double bound = std::isinf(ub)
                                         ? std::numeric_limits<double>::infinity()
                                         : params.t * ub;
                const double pd = proj_dist(x.coords, y.coords);
                if (pd < bound) {
                    ++local.filter_admitted;
                    const double d = euclidean(dataset.row(x.id), dataset.row(y.id));
                    top.offer(make_pair_neighbor(x.id, y.id, d));
                    ub = std::min(ub, top.bound());
                    ++count;
                }
                if (count > T) {
                    local.budget_hit = true;
                    return false;
                }
                return true;
            });
    }

    PairResult res;
    res.pairs = top.sorted();
    res.verified = count;
    if (stats) *stats = local;
    return res;
}

}  // namespace pmlsh
