#include "pmlsh/pmtree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pmlsh/data.hpp"

namespace pmlsh {

namespace {

double dist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        acc += t * t;
    }
    return std::sqrt(acc);
}

}  // namespace

PivotSet select_pivots(const std::vector<ProjectedPoint>& sample, std::size_t s,
                       std::uint64_t seed) {
    if (sample.size() < s) throw std::invalid_argument("select_pivots: sample smaller than s");
    if (s == 0) throw std::invalid_argument("select_pivots: s must be >= 1");
    (void)seed;  // selection is deterministic given the sample order

    const std::size_t m = sample[0].coords.size();
    std::vector<double> centroid(m, 0.0);
    for (const auto& p : sample) {
        for (std::size_t j = 0; j < m; ++j) centroid[j] += p.coords[j];
    }
    for (double& v : centroid) v /= static_cast<double>(sample.size());

    PivotSet ps;
    std::vector<std::size_t> chosen;
    std::vector<double> min_dist(sample.size(), std::numeric_limits<double>::infinity());

    // first pivot: farthest from the centroid
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double d = dist(sample[i].coords, centroid);
        if (d > best_d) {
            best_d = d;
            best = i;
        }
    }
    chosen.push_back(best);

    while (chosen.size() < s) {
        const auto& last = sample[chosen.back()].coords;
        best_d = -1.0;
        best = SIZE_MAX;
        for (std::size_t i = 0; i < sample.size(); ++i) {
            const double d = dist(sample[i].coords, last);
            if (d < min_dist[i]) min_dist[i] = d;
            if (min_dist[i] > best_d &&
                std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
                best_d = min_dist[i];
                best = i;
            }
        }
        if (best == SIZE_MAX) throw std::invalid_argument("select_pivots: not enough distinct points");
        chosen.push_back(best);
    }
    for (std::size_t idx : chosen) ps.pivots.push_back(sample[idx].coords);
    return ps;
}

double mindist(const RoutingEntry& e1, const RoutingEntry& e2) {
    double lb = dist(e1.center, e2.center) - e1.radius - e2.radius;
    const std::size_t s = std::min(e1.rings.size(), e2.rings.size());
    for (std::size_t i = 0; i < s; ++i) {
        const double gap = std::max(e1.rings[i].min - e2.rings[i].max,
                                    e2.rings[i].min - e1.rings[i].max);
        if (gap > lb) lb = gap;
    }
    return std::max(0.0, lb);
}

SplitPlan plan_split(const std::vector<std::vector<double>>& centers,
                     const std::vector<double>& child_radii, PromotePolicy policy, Rng& rng) {
    const std::size_t k = centers.size();
    if (k < 2) throw std::invalid_argument("plan_split: need at least two entries");

    std::vector<double> dmat(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double d = dist(centers[i], centers[j]);
            dmat[i * k + j] = d;
            dmat[j * k + i] = d;
        }
    }

    auto evaluate = [&](std::size_t a, std::size_t b, SplitPlan& plan) {
        plan.center_a = a;
        plan.center_b = b;
        plan.assignment.assign(k, 0);
        plan.dist_to_center.assign(k, 0.0);
        plan.radius_a = 0.0;
        plan.radius_b = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double da = dmat[i * k + a];
            const double db = dmat[i * k + b];
            if (da <= db) {
                plan.assignment[i] = 0;
                plan.dist_to_center[i] = da;
                plan.radius_a = std::max(plan.radius_a, da + child_radii[i]);
            } else {
                plan.assignment[i] = 1;
                plan.dist_to_center[i] = db;
                plan.radius_b = std::max(plan.radius_b, db + child_radii[i]);
            }
        }
    };

    SplitPlan best;
    if (policy == PromotePolicy::kRandom) {
        const std::size_t a = rng.uniform_u64(k);
        std::size_t b = rng.uniform_u64(k - 1);
        if (b >= a) ++b;
        evaluate(std::min(a, b), std::max(a, b), best);
        return best;
    }

    double best_sum = std::numeric_limits<double>::infinity();
    SplitPlan cur;
    for (std::size_t a = 0; a + 1 < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            evaluate(a, b, cur);
            const double sum = cur.radius_a + cur.radius_b;
            if (sum < best_sum) {
                best_sum = sum;
                best = cur;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// PMTree construction

std::uint32_t PMTree::new_node(bool leaf) {
    nodes_.emplace_back();
    nodes_.back().leaf = leaf;
    return static_cast<std::uint32_t>(nodes_.size() - 1);
}

const RoutingEntry& PMTree::entry_of(std::uint32_t node_id) const {
    const Node& n = nodes_[node_id];
    return nodes_[n.parent].routes[static_cast<std::size_t>(n.parent_slot)];
}

RoutingEntry& PMTree::entry_of(std::uint32_t node_id) {
    Node& n = nodes_[node_id];
    return nodes_[n.parent].routes[static_cast<std::size_t>(n.parent_slot)];
}

std::vector<double> PMTree::pivot_distances(std::span<const double> coords) const {
    std::vector<double> out(pivots_.count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist(coords, pivots_.pivots[i]);
    return out;
}

RoutingEntry PMTree::make_routing_entry(std::vector<double> center, std::uint32_t child) const {
    RoutingEntry e;
    e.center = std::move(center);
    e.child = child;
    e.rings.resize(pivots_.count());
    return e;
}

PMTree PMTree::build(const std::vector<ProjectedPoint>& points, const PivotSet& pivots,
                     const Config& config) {
    if (config.capacity < 2) throw std::invalid_argument("PMTree: capacity must be >= 2");
    PMTree t;
    t.capacity_ = config.capacity;
    t.policy_ = config.policy;
    t.seed_ = config.seed;
    t.rng_ = Rng(config.seed);
    t.pivots_ = pivots;
    if (!points.empty()) t.dim_ = points[0].coords.size();
    for (const auto& p : points) t.insert(p);
    t.finalize_radii();
    return t;
}

void PMTree::finalize_radii() {
    // The covering bound PD_child + r_child kept radii sound during the
    // insertion phase but compounds across levels. Tighten every routing
    // entry to the exact max point distance, floored at the child radii so
    // FindLCA's path monotonicity survives.
    if (root_ == kNullNode) return;
    auto walk = [&](auto&& self, std::uint32_t id) -> std::vector<const LeafEntry*> {
        Node& n = nodes_[id];
        std::vector<const LeafEntry*> pts;
        if (n.leaf) {
            pts.reserve(n.points.size());
            for (const auto& p : n.points) pts.push_back(&p);
            return pts;
        }
        for (RoutingEntry& e : n.routes) {
            auto sub = self(self, e.child);
            double r = 0.0;
            for (const LeafEntry* p : sub) r = std::max(r, dist(p->coords, e.center));
            if (!nodes_[e.child].leaf) {
                for (const RoutingEntry& f : nodes_[e.child].routes) {
                    r = std::max(r, f.radius);
                }
            }
            e.radius = r;
            pts.insert(pts.end(), sub.begin(), sub.end());
        }
        return pts;
    };
    (void)walk(walk, root_);
}

void PMTree::insert(const ProjectedPoint& p) {
    if (p.coords.size() != dim_ && size_ > 0) {
        throw std::invalid_argument("PMTree::insert: dimension mismatch");
    }
    dim_ = p.coords.size();

    LeafEntry le;
    le.id = p.id;
    le.coords = p.coords;
    le.pivot_dists = pivot_distances(p.coords);

    if (root_ == kNullNode) {
        root_ = new_node(true);
        nodes_[root_].points.push_back(std::move(le));
        ++size_;
        return;
    }

    // Descend: prefer the child needing no radius enlargement (min distance),
    // otherwise minimal enlargement, ties by smaller center distance.
    std::uint32_t cur = root_;
    double dist_to_center = std::numeric_limits<double>::quiet_NaN();
    struct PathStep {
        std::uint32_t node;
        std::size_t slot;
    };
    std::vector<PathStep> path;
    while (!nodes_[cur].leaf) {
        const Node& n = nodes_[cur];
        std::size_t best_slot = 0;
        double best_key = std::numeric_limits<double>::infinity();
        double best_d = 0.0;
        bool best_fits = false;
        for (std::size_t s = 0; s < n.routes.size(); ++s) {
            const RoutingEntry& e = n.routes[s];
            const double d = dist(p.coords, e.center);
            const bool fits = d <= e.radius;
            double key;
            if (fits) {
                key = d;
            } else {
                key = d - e.radius;
            }
            if ((fits && !best_fits) || (fits == best_fits && key < best_key) ||
                (fits == best_fits && key == best_key && d < best_d)) {
                best_slot = s;
                best_key = key;
                best_d = d;
                best_fits = fits;
            }
        }
        path.push_back({cur, best_slot});
        dist_to_center = best_d;
        cur = n.routes[best_slot].child;
    }

    le.parent_dist = path.empty() ? std::numeric_limits<double>::quiet_NaN() : dist_to_center;
    nodes_[cur].points.push_back(std::move(le));
    ++size_;

    // Expand rings and radii along the path (bottom-up radii so the
    // covering bound PD_child + r_child stays monotone).
    const std::vector<double>& pd = nodes_[cur].points.back().pivot_dists;
    for (const auto& step : path) {
        RoutingEntry& e = nodes_[step.node].routes[step.slot];
        for (std::size_t i = 0; i < e.rings.size(); ++i) {
            e.rings[i].min = std::min(e.rings[i].min, pd[i]);
            e.rings[i].max = std::max(e.rings[i].max, pd[i]);
        }
    }
    if (!path.empty()) {
        RoutingEntry& leaf_entry = nodes_[path.back().node].routes[path.back().slot];
        leaf_entry.radius = std::max(leaf_entry.radius, dist_to_center);
        for (std::size_t i = path.size(); i-- > 1;) {
            RoutingEntry& child_e = nodes_[path[i].node].routes[path[i].slot];
            RoutingEntry& parent_e = nodes_[path[i - 1].node].routes[path[i - 1].slot];
            parent_e.radius =
                std::max(parent_e.radius, child_e.parent_dist + child_e.radius);
        }
    }

    if (nodes_[cur].points.size() > capacity_) split_leaf(cur);
}

void PMTree::refresh_child_links(std::uint32_t node_id) {
    Node& n = nodes_[node_id];
    if (n.leaf) return;
    for (std::size_t s = 0; s < n.routes.size(); ++s) {
        Node& child = nodes_[n.routes[s].child];
        child.parent = node_id;
        child.parent_slot = static_cast<std::int32_t>(s);
    }
}

void PMTree::reinforce_up(std::uint32_t node_id) {
    // Re-impose entry.radius >= PD_child + r_child along the root path.
    std::uint32_t cur = node_id;
    while (nodes_[cur].parent != kNullNode) {
        RoutingEntry& e = entry_of(cur);
        double need = e.radius;
        for (const RoutingEntry& c : nodes_[cur].routes) {
            need = std::max(need, c.parent_dist + c.radius);
        }
        if (nodes_[cur].leaf) {
            for (const LeafEntry& o : nodes_[cur].points) {
                need = std::max(need, o.parent_dist);
            }
        }
        if (need <= e.radius) break;
        e.radius = need;
        cur = nodes_[cur].parent;
    }
}

void PMTree::split_leaf(std::uint32_t leaf_id) {
    Node& leaf = nodes_[leaf_id];
    std::vector<LeafEntry> entries = std::move(leaf.points);
    leaf.points.clear();

    std::vector<std::vector<double>> centers;
    centers.reserve(entries.size());
    for (const auto& e : entries) centers.push_back(e.coords);
    std::vector<double> zeros(entries.size(), 0.0);
    SplitPlan plan = plan_split(centers, zeros, policy_, rng_);

    const std::uint32_t other_id = new_node(true);
    RoutingEntry ea = make_routing_entry(centers[plan.center_a], leaf_id);
    RoutingEntry eb = make_routing_entry(centers[plan.center_b], other_id);

    bool first_a = true, first_b = true;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        LeafEntry le = std::move(entries[i]);
        le.parent_dist = plan.dist_to_center[i];
        RoutingEntry& target = plan.assignment[i] == 0 ? ea : eb;
        bool& first = plan.assignment[i] == 0 ? first_a : first_b;
        for (std::size_t r = 0; r < target.rings.size(); ++r) {
            if (first) {
                target.rings[r] = {le.pivot_dists[r], le.pivot_dists[r]};
            } else {
                target.rings[r].min = std::min(target.rings[r].min, le.pivot_dists[r]);
                target.rings[r].max = std::max(target.rings[r].max, le.pivot_dists[r]);
            }
        }
        first = false;
        if (plan.assignment[i] == 0) {
            nodes_[leaf_id].points.push_back(std::move(le));
        } else {
            nodes_[other_id].points.push_back(std::move(le));
        }
    }
    ea.radius = plan.radius_a;
    eb.radius = plan.radius_b;

    attach_split(leaf_id, std::move(ea), std::move(eb));
}

void PMTree::split_inner(std::uint32_t node_id) {
    std::vector<RoutingEntry> entries = std::move(nodes_[node_id].routes);
    nodes_[node_id].routes.clear();

    std::vector<std::vector<double>> centers;
    std::vector<double> radii;
    centers.reserve(entries.size());
    for (const auto& e : entries) {
        centers.push_back(e.center);
        radii.push_back(e.radius);
    }
    SplitPlan plan = plan_split(centers, radii, policy_, rng_);

    const std::uint32_t other_id = new_node(false);
    RoutingEntry ea = make_routing_entry(centers[plan.center_a], node_id);
    RoutingEntry eb = make_routing_entry(centers[plan.center_b], other_id);

    bool first_a = true, first_b = true;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        RoutingEntry re = std::move(entries[i]);
        re.parent_dist = plan.dist_to_center[i];
        RoutingEntry& target = plan.assignment[i] == 0 ? ea : eb;
        bool& first = plan.assignment[i] == 0 ? first_a : first_b;
        for (std::size_t r = 0; r < target.rings.size(); ++r) {
            if (first) {
                target.rings[r] = re.rings[r];
            } else {
                target.rings[r].min = std::min(target.rings[r].min, re.rings[r].min);
                target.rings[r].max = std::max(target.rings[r].max, re.rings[r].max);
            }
        }
        first = false;
        if (plan.assignment[i] == 0) {
            nodes_[node_id].routes.push_back(std::move(re));
        } else {
            nodes_[other_id].routes.push_back(std::move(re));
        }
    }
    ea.radius = plan.radius_a;
    eb.radius = plan.radius_b;
    refresh_child_links(node_id);
    refresh_child_links(other_id);

    attach_split(node_id, std::move(ea), std::move(eb));
}

void PMTree::attach_split(std::uint32_t old_node, RoutingEntry&& ea, RoutingEntry&& eb) {
    const std::uint32_t parent = nodes_[old_node].parent;
    if (parent == kNullNode) {
        const std::uint32_t new_root = new_node(false);
        nodes_[new_root].routes.push_back(std::move(ea));
        nodes_[new_root].routes.push_back(std::move(eb));
        refresh_child_links(new_root);
        root_ = new_root;
        return;
    }

    Node& pn = nodes_[parent];
    const auto slot = static_cast<std::size_t>(nodes_[old_node].parent_slot);
    if (pn.parent != kNullNode) {
        const std::vector<double>& pc = entry_of(parent).center;
        ea.parent_dist = dist(ea.center, pc);
        eb.parent_dist = dist(eb.center, pc);
    }
    pn.routes[slot] = std::move(ea);
    pn.routes.push_back(std::move(eb));
    refresh_child_links(parent);
    reinforce_up(parent == kNullNode ? old_node : nodes_[old_node].parent);

    if (nodes_[parent].routes.size() > capacity_) {
        split_inner(parent);
    }
}

double PMTree::root_cover_radius() const {
    if (root_ == kNullNode) return 0.0;
    const Node& r = nodes_[root_];
    if (r.leaf) {
        if (r.points.empty()) return 0.0;
        double rad = 0.0;
        for (const auto& p : r.points) rad = std::max(rad, dist(p.coords, r.points[0].coords));
        return rad;
    }
    const auto& base = r.routes[0].center;
    double rad = 0.0;
    for (const auto& e : r.routes) rad = std::max(rad, dist(e.center, base) + e.radius);
    return rad;
}

// ---------------------------------------------------------------------------
// Range scan

RangeScan::RangeScan(const PMTree& tree, std::span<const double> query)
    : tree_(tree), query_(query.begin(), query.end()) {
    if (tree.root() == kNullNode) return;
    if (query.size() != tree.dim()) {
        throw std::invalid_argument("RangeScan: query dimension mismatch");
    }
    pivot_dists_.resize(tree.pivot_count());
    for (std::size_t i = 0; i < pivot_dists_.size(); ++i) {
        pivot_dists_[i] = dist(query, tree.pivots().pivots[i]);
    }
    const Node& root = tree.node(tree.root());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (root.leaf) {
        push_point_items(tree.root(), nan, 0.0);
    } else {
        push_entry_items(tree.root(), nan, 0.0);
    }
}

double RangeScan::cheap_entry_lb(const RoutingEntry& e, double parent_center_dist) const {
    double lb = 0.0;
    if (!std::isnan(parent_center_dist) && !std::isnan(e.parent_dist)) {
        lb = std::fabs(parent_center_dist - e.parent_dist) - e.radius;
    }
    for (std::size_t i = 0; i < e.rings.size(); ++i) {
        const double gap = std::max(pivot_dists_[i] - e.rings[i].max,
                                    e.rings[i].min - pivot_dists_[i]);
        if (gap > lb) lb = gap;
    }
    return std::max(0.0, lb);
}

double RangeScan::cheap_point_lb(const LeafEntry& o, double center_dist) const {
    double lb = 0.0;
    if (!std::isnan(center_dist) && !std::isnan(o.parent_dist)) {
        lb = std::fabs(center_dist - o.parent_dist);
    }
    for (std::size_t i = 0; i < o.pivot_dists.size(); ++i) {
        const double gap = std::fabs(pivot_dists_[i] - o.pivot_dists[i]);
        if (gap > lb) lb = gap;
    }
    return lb;
}

void RangeScan::push_entry_items(std::uint32_t node_id, double center_dist, double radius) {
    const Node& n = tree_.node(node_id);
    for (std::uint32_t s = 0; s < n.routes.size(); ++s) {
        const RoutingEntry& e = n.routes[s];
        const double cheap = cheap_entry_lb(e, center_dist);
        Item item{cheap, node_id, s, std::numeric_limits<double>::quiet_NaN(),
                  false, false, seq_++};
        if (cheap <= radius) {
            const double cd = dist(query_, e.center);
            ++stats_.distance_computations;
            item.center_dist = cd;
            item.lb = std::max(cheap, cd - e.radius);
        }
        heap_.push(item);
    }
}

void RangeScan::push_point_items(std::uint32_t leaf_id, double center_dist, double radius) {
    const Node& n = tree_.node(leaf_id);
    for (std::uint32_t s = 0; s < n.points.size(); ++s) {
        const LeafEntry& o = n.points[s];
        const double cheap = cheap_point_lb(o, center_dist);
        heap_.push(Item{cheap, leaf_id, s, std::numeric_limits<double>::quiet_NaN(),
                        true, false, seq_++});
        (void)radius;
    }
}

std::size_t RangeScan::extend(double radius, std::size_t max_results) {
    std::size_t added = 0;
    while (!heap_.empty() && results_.size() < max_results) {
        Item item = heap_.top();
        if (item.lb > radius) break;
        heap_.pop();
        if (item.is_point) {
            const LeafEntry& o = tree_.node(item.node).points[item.slot];
            double d = item.center_dist;
            if (!item.exact) {
                d = dist(query_, o.coords);
                ++stats_.distance_computations;
            }
            if (d <= radius) {
                results_.push_back({o.id, d});
                ++added;
            } else {
                item.lb = d;
                item.center_dist = d;
                item.exact = true;
                heap_.push(item);
            }
            continue;
        }
        const RoutingEntry& e = tree_.node(item.node).routes[item.slot];
        if (std::isnan(item.center_dist)) {
            const double cd = dist(query_, e.center);
            ++stats_.distance_computations;
            item.center_dist = cd;
            item.lb = std::max(item.lb, cd - e.radius);
            heap_.push(item);
            continue;
        }
        // expand the child with the cached center distance
        const Node& child = tree_.node(e.child);
        if (child.leaf) {
            push_point_items(e.child, item.center_dist, radius);
        } else {
            push_entry_items(e.child, item.center_dist, radius);
        }
    }
    return added;
}

std::vector<RangeHit> PMTree::range_query(std::span<const double> query, double radius,
                                          std::size_t budget, QueryStats* stats) const {
    if (radius < 0.0) throw std::invalid_argument("range_query: radius must be >= 0");
    RangeScan scan(*this, query);
    scan.extend(radius, budget);
    if (stats) *stats = scan.stats();
    return scan.results();
}

// ---------------------------------------------------------------------------
// FindLCA, cost model, stats

std::vector<LcaNode> PMTree::find_lca_nodes(double R) const {
    std::vector<LcaNode> out;
    if (root_ == kNullNode) return out;

    std::vector<PointId> scratch;
    auto subtree_size = [&](std::uint32_t id) {
        scratch.clear();
        collect_subtree_ids(id, scratch);
        return scratch.size();
    };

    // Algorithm 5 on (node, radius) pairs; the root uses its virtual radius.
    auto visit = [&](auto&& self, std::uint32_t id, double radius) -> void {
        const Node& n = nodes_[id];
        if (n.leaf) return;
        if (radius < R) {
            out.push_back({id, radius, subtree_size(id)});
            return;
        }
        for (const RoutingEntry& e : n.routes) self(self, e.child, e.radius);
    };
    visit(visit, root_, root_cover_radius());
    return out;
}

double PMTree::estimate_range_cost(const std::function<double(double)>& F, double r_q) const {
    if (root_ == kNullNode) return 0.0;
    auto clamped = [&F](double x) { return std::clamp(F(x), 0.0, 1.0); };
    double cc = static_cast<double>(nodes_[root_].entry_count());
    for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
        if (id == root_) continue;
        const Node& n = nodes_[id];
        const RoutingEntry& e = entry_of(id);
        double pr = clamped(e.radius + r_q);
        for (const HyperRing& ring : e.rings) {
            pr *= std::max(0.0, clamped(ring.max + r_q) - clamped(ring.min - r_q));
        }
        cc += static_cast<double>(n.entry_count()) * pr;
    }
    return cc;
}

TreeStats PMTree::stats() const {
    TreeStats st;
    if (root_ == kNullNode) return st;
    st.node_count = nodes_.size();
    std::size_t fill = 0;
    for (const Node& n : nodes_) {
        if (n.leaf) {
            ++st.leaf_count;
            fill += n.points.size();
        }
    }
    st.mean_leaf_fill = static_cast<double>(fill) / static_cast<double>(st.leaf_count);
    std::uint32_t cur = root_;
    st.height = 1;
    while (!nodes_[cur].leaf) {
        ++st.height;
        cur = nodes_[cur].routes[0].child;
    }
    return st;
}

void PMTree::collect_subtree_ids(std::uint32_t node, std::vector<PointId>& out) const {
    const Node& n = nodes_[node];
    if (n.leaf) {
        for (const auto& p : n.points) out.push_back(p.id);
        return;
    }
    for (const auto& e : n.routes) collect_subtree_ids(e.child, out);
}

void PMTree::collect_leaves(std::uint32_t node, std::vector<std::uint32_t>& out) const {
    const Node& n = nodes_[node];
    if (n.leaf) {
        out.push_back(node);
        return;
    }
    for (const auto& e : n.routes) collect_leaves(e.child, out);
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

constexpr char kSnapMagic[4] = {'P', 'M', 'L', 'S'};
constexpr std::uint32_t kSnapVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw IoError(std::string("snapshot truncated at ") + what);
    }
    return v;
}

void put_doubles(std::ofstream& out, std::span<const double> v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::ifstream& in, std::vector<double>& v, std::size_t count,
                 const char* what) {
    v.resize(count);
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(count * sizeof(double)))) {
        throw IoError(std::string("snapshot truncated at ") + what);
    }
}

}  // namespace

struct SnapshotLoader {
    std::ifstream& in;
    PMTree& tree;
    std::size_t m;
    std::size_t s;

    std::uint32_t load_node(std::uint32_t parent, std::int32_t parent_slot) {
        const auto is_leaf = get<std::uint8_t>(in, "node kind");
        const auto count = get<std::uint32_t>(in, "entry count");
        const std::uint32_t id = tree.new_node(is_leaf != 0);
        tree.nodes_[id].parent = parent;
        tree.nodes_[id].parent_slot = parent_slot;
        if (is_leaf) {
            tree.nodes_[id].points.resize(count);
            for (auto& p : tree.nodes_[id].points) {
                p.id = get<PointId>(in, "point id");
                p.parent_dist = get<double>(in, "point pd");
                get_doubles(in, p.coords, m, "point coords");
                get_doubles(in, p.pivot_dists, s, "pivot dists");
            }
            return id;
        }
        tree.nodes_[id].routes.resize(count);
        for (std::uint32_t slot = 0; slot < count; ++slot) {
            RoutingEntry& e = tree.nodes_[id].routes[slot];
            get_doubles(in, e.center, m, "entry center");
            e.radius = get<double>(in, "entry radius");
            e.parent_dist = get<double>(in, "entry pd");
            e.rings.resize(s);
            for (auto& ring : e.rings) {
                ring.min = get<double>(in, "ring min");
                ring.max = get<double>(in, "ring max");
            }
        }
        // children follow in preorder; counts are explicit so recursion is safe
        for (std::uint32_t slot = 0; slot < count; ++slot) {
            tree.nodes_[id].routes[slot].child =
                load_node(id, static_cast<std::int32_t>(slot));
        }
        return id;
    }
};

namespace {

void save_node(std::ofstream& out, const PMTree& t, std::uint32_t id) {
    const Node& n = t.node(id);
    put<std::uint8_t>(out, n.leaf ? 1 : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(n.entry_count()));
    if (n.leaf) {
        for (const auto& p : n.points) {
            put(out, p.id);
            put(out, p.parent_dist);
            put_doubles(out, p.coords);
            put_doubles(out, p.pivot_dists);
        }
        return;
    }
    for (const auto& e : n.routes) {
        put_doubles(out, e.center);
        put(out, e.radius);
        put(out, e.parent_dist);
        for (const auto& ring : e.rings) {
            put(out, ring.min);
            put(out, ring.max);
        }
    }
    for (const auto& e : n.routes) save_node(out, t, e.child);
}

}  // namespace

void save_snapshot(const PMTree& tree, std::size_t family_dim, std::uint64_t family_seed,
                   const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kSnapMagic, 4);
    put(out, kSnapVersion);
    put(out, static_cast<std::uint32_t>(tree.dim()));           // m
    put(out, static_cast<std::uint32_t>(tree.pivot_count()));   // s
    put(out, static_cast<std::uint32_t>(tree.capacity()));      // M
    put(out, family_seed);
    put(out, static_cast<std::uint64_t>(family_dim));
    put(out, static_cast<std::uint8_t>(tree.policy()));
    put(out, static_cast<std::uint64_t>(tree.size()));
    for (const auto& pv : tree.pivots().pivots) put_doubles(out, pv);
    const std::uint8_t has_root = tree.root() != kNullNode ? 1 : 0;
    put(out, has_root);
    if (has_root) save_node(out, tree, tree.root());
    if (!out) throw IoError("write failed: " + path);
}

Snapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kSnapMagic, 4) != 0) {
        throw IoError(path + ": not a PM-LSH snapshot (bad magic)");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kSnapVersion) {
        throw IoError(path + ": unsupported snapshot version " + std::to_string(version));
    }
    Snapshot snap;
    const auto m = get<std::uint32_t>(in, "m");
    const auto s = get<std::uint32_t>(in, "s");
    const auto capacity = get<std::uint32_t>(in, "M");
    snap.family_seed = get<std::uint64_t>(in, "family seed");
    snap.family_dim = static_cast<std::size_t>(get<std::uint64_t>(in, "family dim"));
    const auto policy = get<std::uint8_t>(in, "policy");
    const auto size = get<std::uint64_t>(in, "size");

    PMTree& t = snap.tree;
    t.capacity_ = capacity;
    t.dim_ = m;
    t.policy_ = static_cast<PromotePolicy>(policy);
    t.size_ = static_cast<std::size_t>(size);
    t.pivots_.pivots.resize(s);
    for (auto& pv : t.pivots_.pivots) get_doubles(in, pv, m, "pivot coords");
    const auto has_root = get<std::uint8_t>(in, "root flag");
    if (has_root) {
        SnapshotLoader loader{in, t, m, s};
        t.root_ = loader.load_node(kNullNode, -1);
    }
    return snap;
}

}  // namespace pmlsh
