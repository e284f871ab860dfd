#pragma once

// Shared test fixtures: projected point generators and a structural audit
// oracle that recomputes tree invariants independently of the insertion code.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "pmlsh/data.hpp"
#include "pmlsh/pmtree.hpp"
#include "pmlsh/projection.hpp"
#include "pmlsh/rng.hpp"

namespace pmlsh::test {

inline double pdist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        acc += t * t;
    }
    return std::sqrt(acc);
}

inline std::vector<ProjectedPoint> random_projected(std::size_t n, std::size_t m,
                                                    std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ProjectedPoint> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
        pts[i].id = static_cast<PointId>(i);
        pts[i].coords.resize(m);
        for (auto& v : pts[i].coords) v = rng.normal();
    }
    return pts;
}

inline std::vector<ProjectedPoint> project_dataset(const Dataset& ds, const HashFamily& fam) {
    std::vector<ProjectedPoint> pts;
    pts.reserve(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) {
        pts.push_back(fam.project(ds.row(i), static_cast<PointId>(i)));
    }
    return pts;
}

struct AuditReport {
    bool radius_sound = true;
    bool rings_sound = true;
    bool balanced = true;
    bool fill_ok = true;
    bool multiset_ok = true;
    bool parent_dist_ok = true;

    bool all_ok() const {
        return radius_sound && rings_sound && balanced && fill_ok && multiset_ok &&
               parent_dist_ok;
    }
};

// Recomputes every invariant from the raw node structure.
inline AuditReport audit_tree(const PMTree& tree, const std::vector<ProjectedPoint>& input) {
    AuditReport rep;
    if (tree.size() == 0) return rep;
    const double tol = 1e-9;

    std::map<PointId, std::size_t> expected;
    for (const auto& p : input) ++expected[p.id];

    std::vector<int> leaf_depths;
    std::map<PointId, std::size_t> seen;

    auto walk = [&](auto&& self, std::uint32_t id, int depth) -> void {
        const Node& n = tree.node(id);
        if (n.leaf) {
            leaf_depths.push_back(depth);
            if (id != tree.root() && (n.points.empty() || n.points.size() > tree.capacity())) {
                rep.fill_ok = false;
            }
            for (const auto& p : n.points) ++seen[p.id];
            return;
        }
        if (n.routes.empty() || n.routes.size() > tree.capacity()) rep.fill_ok = false;
        for (const auto& e : n.routes) self(self, e.child, depth + 1);
    };
    walk(walk, tree.root(), 0);

    rep.multiset_ok = seen == expected;
    rep.balanced = std::all_of(leaf_depths.begin(), leaf_depths.end(),
                               [&](int d) { return d == leaf_depths.front(); });

    // radius / ring soundness for every routing entry
    std::vector<const LeafEntry*> bucket;
    auto gather = [&](auto&& self, std::uint32_t id) -> void {
        const Node& n = tree.node(id);
        if (n.leaf) {
            for (const auto& p : n.points) bucket.push_back(&p);
            return;
        }
        for (const auto& e : n.routes) self(self, e.child);
    };
    auto check_entry = [&](const RoutingEntry& e) {
        bucket.clear();
        gather(gather, e.child);
        for (const LeafEntry* p : bucket) {
            if (pdist(p->coords, e.center) > e.radius + tol) rep.radius_sound = false;
            for (std::size_t i = 0; i < e.rings.size(); ++i) {
                const double d = pdist(p->coords, tree.pivots().pivots[i]);
                if (d < e.rings[i].min - tol || d > e.rings[i].max + tol) {
                    rep.rings_sound = false;
                }
            }
        }
    };
    auto check_all = [&](auto&& self, std::uint32_t id) -> void {
        const Node& n = tree.node(id);
        if (n.leaf) {
            const Node& owner = n;
            if (id != tree.root()) {
                // leaf entries' parent_dist must match the recomputed distance
                const RoutingEntry* e = nullptr;
                const Node& par = tree.node(owner.parent);
                e = &par.routes[static_cast<std::size_t>(owner.parent_slot)];
                for (const auto& p : n.points) {
                    if (std::fabs(pdist(p.coords, e->center) - p.parent_dist) > tol) {
                        rep.parent_dist_ok = false;
                    }
                }
            }
            for (const auto& p : n.points) {
                for (std::size_t i = 0; i < p.pivot_dists.size(); ++i) {
                    const double d = pdist(p.coords, tree.pivots().pivots[i]);
                    if (std::fabs(d - p.pivot_dists[i]) > tol) rep.parent_dist_ok = false;
                }
            }
            return;
        }
        for (const auto& e : n.routes) {
            check_entry(e);
            self(self, e.child);
        }
    };
    check_all(check_all, tree.root());
    return rep;
}

// All points with projected distance <= radius, by linear scan.
inline std::vector<RangeHit> scan_range(const std::vector<ProjectedPoint>& pts,
                                        std::span<const double> q, double radius) {
    std::vector<RangeHit> out;
    for (const auto& p : pts) {
        const double d = pdist(p.coords, q);
        if (d <= radius) out.push_back({p.id, d});
    }
    std::sort(out.begin(), out.end(), [](const RangeHit& a, const RangeHit& b) {
        return a.id < b.id;
    });
    return out;
}

inline bool same_hits(std::vector<RangeHit> a, std::vector<RangeHit> b) {
    auto key = [](const RangeHit& h) { return h.id; };
    std::sort(a.begin(), a.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
    std::sort(b.begin(), b.end(), [&](auto& x, auto& y) { return key(x) < key(y); });
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].id != b[i].id) return false;
        if (std::fabs(a[i].dist - b[i].dist) > 1e-9) return false;
    }
    return true;
}

}  // namespace pmlsh::test
