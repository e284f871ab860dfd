#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "pmlsh/projection.hpp"
#include "pmlsh/rng.hpp"

namespace pmlsh {

constexpr std::uint32_t kNullNode = std::numeric_limits<std::uint32_t>::max();

// Global pivots for the hyper-ring pruning. Drawn from the indexed data by
// farthest-first traversal (see select_pivots).
struct PivotSet {
    std::vector<std::vector<double>> pivots;  // s vectors of dimension m

    std::size_t count() const { return pivots.size(); }
};

// Farthest-first traversal over a sample: first pivot maximizes distance to
// the sample centroid, each next maximizes the minimum distance to the
// chosen pivots. Deterministic per seed.
PivotSet select_pivots(const std::vector<ProjectedPoint>& sample, std::size_t s,
                       std::uint64_t seed);

struct HyperRing {
    double min = 0.0;
    double max = 0.0;
};

// Inner-node entry: covering sphere, distance to the parent center (NaN for
// root entries) and one distance interval per global pivot.
struct RoutingEntry {
    std::vector<double> center;  // e.RO
    double radius = 0.0;         // e.r
    double parent_dist = std::numeric_limits<double>::quiet_NaN();  // e.PD
    std::vector<HyperRing> rings;                                   // e.HR
    std::uint32_t child = kNullNode;
};

struct LeafEntry {
    PointId id = 0;
    double parent_dist = std::numeric_limits<double>::quiet_NaN();  // o.PD
    std::vector<double> coords;
    std::vector<double> pivot_dists;  // one per global pivot (degenerate ring)
};

struct Node {
    bool leaf = true;
    std::uint32_t parent = kNullNode;
    std::int32_t parent_slot = -1;
    std::vector<RoutingEntry> routes;  // inner nodes
    std::vector<LeafEntry> points;     // leaf nodes

    std::size_t entry_count() const { return leaf ? points.size() : routes.size(); }
};

enum class PromotePolicy : std::uint8_t { kMRad = 0, kRandom = 1 };

// Lower bound on the projected distance between any point pair under two
// routing entries: max over the pivot-interval gaps and the center term
// |RO1,RO2| - r1 - r2, floored at zero.
double mindist(const RoutingEntry& e1, const RoutingEntry& e2);

// Promotion + partition plan for M+1 entries. centers is a flat k x m
// matrix of the entry centers; child_radii holds each entry's covering
// radius (zero for leaf points). Under kMRad the returned pair of centers
// minimizes radius_a + radius_b over all C(k,2) candidates with the
// nearest-center assignment rule (ties to the first center).
struct SplitPlan {
    std::size_t center_a = 0;
    std::size_t center_b = 0;
    std::vector<std::uint8_t> assignment;  // 0 -> a, 1 -> b
    std::vector<double> dist_to_center;    // per entry, to its assigned center
    double radius_a = 0.0;
    double radius_b = 0.0;
};

SplitPlan plan_split(const std::vector<std::vector<double>>& centers,
                     const std::vector<double>& child_radii, PromotePolicy policy, Rng& rng);

struct RangeHit {
    PointId id;
    double dist;  // projected distance
};

// Query-side instrumentation; distance_computations counts entry-center and
// leaf-point distance evaluations (the cost model's unit).
struct QueryStats {
    std::size_t distance_computations = 0;
};

class PMTree;

// Incremental best-first range scan. The pending frontier persists across
// radius enlargements, so a sequence of growing radii never re-examines a
// node or recomputes a point distance (Algorithm 2's cumulative rounds).
class RangeScan {
public:
    RangeScan(const PMTree& tree, std::span<const double> query);

    // Admit every point with projected distance <= radius until the
    // cumulative result count would exceed max_results. Returns hits added
    // by this call; results() has the cumulative list.
    std::size_t extend(double radius, std::size_t max_results);

    const std::vector<RangeHit>& results() const { return results_; }
    bool exhausted() const { return heap_.empty(); }
    const QueryStats& stats() const { return stats_; }

private:
    struct Item {
        double lb;
        std::uint32_t node;      // owning node of the entry, or leaf node for points
        std::uint32_t slot;
        double center_dist;      // NaN until computed; for points: exact distance
        bool is_point;
        bool exact;
        std::uint64_t seq;
    };
    struct ItemOrder {
        bool operator()(const Item& a, const Item& b) const {
            if (a.lb != b.lb) return a.lb > b.lb;
            return a.seq > b.seq;
        }
    };

    void push_entry_items(std::uint32_t node_id, double center_dist, double radius);
    void push_point_items(std::uint32_t leaf_id, double center_dist, double radius);
    double cheap_entry_lb(const RoutingEntry& e, double parent_center_dist) const;
    double cheap_point_lb(const LeafEntry& o, double center_dist) const;

    const PMTree& tree_;
    std::vector<double> query_;
    std::vector<double> pivot_dists_;  // query to each global pivot
    std::priority_queue<Item, std::vector<Item>, ItemOrder> heap_;
    std::vector<RangeHit> results_;
    QueryStats stats_;
    std::uint64_t seq_ = 0;
};

// Reference to a node collected by find_lca_nodes.
struct LcaNode {
    std::uint32_t node = kNullNode;
    double radius = 0.0;
    std::size_t subtree_points = 0;
};

struct TreeStats {
    std::size_t height = 0;  // number of levels, 1 for a lone leaf
    std::size_t node_count = 0;
    std::size_t leaf_count = 0;
    double mean_leaf_fill = 0.0;
};

struct Snapshot;
Snapshot load_snapshot(const std::string& path);

// PM-tree over projected points: an M-tree whose routing entries carry
// per-pivot distance intervals. Built by one-by-one insertion; frozen and
// immutable afterwards, safe for concurrent read-only queries.
class PMTree {
public:
    struct Config {
        std::size_t capacity = 16;  // M
        PromotePolicy policy = PromotePolicy::kMRad;
        std::uint64_t seed = 0;     // drives the kRandom promote policy
    };

    static PMTree build(const std::vector<ProjectedPoint>& points, const PivotSet& pivots,
                        const Config& config);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t pivot_count() const { return pivots_.count(); }
    std::size_t dim() const { return dim_; }
    PromotePolicy policy() const { return policy_; }
    const PivotSet& pivots() const { return pivots_; }

    std::uint32_t root() const { return root_; }
    const Node& node(std::uint32_t id) const { return nodes_[id]; }
    std::size_t node_count() const { return nodes_.size(); }

    // Covering radius the root would get as a routing entry (max over root
    // entries of center distance to the first entry plus its radius). Used
    // by FindLCA's root case and the gamma calibration.
    double root_cover_radius() const;

    // Exact range query: all indexed points with projected distance <= radius.
    std::vector<RangeHit> range_query(std::span<const double> query, double radius,
                                      std::size_t budget = SIZE_MAX,
                                      QueryStats* stats = nullptr) const;

    // Algorithm 5: maximal inner nodes with radius < R, root included via
    // its virtual covering radius.
    std::vector<LcaNode> find_lca_nodes(double R) const;

    // Eq. 8 cost model: expected distance computations of range(q, r_q)
    // under the distance distribution F (CDF over the same space the tree
    // indexes). F is evaluated clamped to [0, 1] outside its support.
    double estimate_range_cost(const std::function<double(double)>& F, double r_q) const;

    TreeStats stats() const;

    // Ids of every point stored under `node`, preorder.
    void collect_subtree_ids(std::uint32_t node, std::vector<PointId>& out) const;
    // Leaf node ids under `node`, preorder.
    void collect_leaves(std::uint32_t node, std::vector<std::uint32_t>& out) const;

    friend class RangeScan;

private:
    friend void save_snapshot(const PMTree& tree, std::size_t family_dim,
                              std::uint64_t family_seed, const std::string& path);
    friend Snapshot load_snapshot(const std::string& path);
    friend struct SnapshotLoader;

    void insert(const ProjectedPoint& p);
    void finalize_radii();
    std::uint32_t new_node(bool leaf);
    void split_leaf(std::uint32_t leaf_id);
    void split_inner(std::uint32_t node_id);
    void attach_split(std::uint32_t old_node, RoutingEntry&& ea, RoutingEntry&& eb);
    void refresh_child_links(std::uint32_t node_id);
    void reinforce_up(std::uint32_t node_id);
    const RoutingEntry& entry_of(std::uint32_t node_id) const;
    RoutingEntry& entry_of(std::uint32_t node_id);
    std::vector<double> pivot_distances(std::span<const double> coords) const;
    RoutingEntry make_routing_entry(std::vector<double> center, std::uint32_t child) const;

    std::vector<Node> nodes_;
    std::uint32_t root_ = kNullNode;
    std::size_t capacity_ = 16;
    std::size_t dim_ = 0;
    std::size_t size_ = 0;
    PromotePolicy policy_ = PromotePolicy::kMRad;
    std::uint64_t seed_ = 0;
    PivotSet pivots_;
    Rng rng_{0};
};

// Index snapshot ("PMLS"): versioned little-endian binary with the tree
// configuration, the hash-family identity needed to reproduce queries, the
// pivots and a preorder node serialization with explicit child counts.
void save_snapshot(const PMTree& tree, std::size_t family_dim, std::uint64_t family_seed,
                   const std::string& path);

struct Snapshot {
    PMTree tree;
    std::size_t family_dim = 0;
    std::uint64_t family_seed = 0;
};

Snapshot load_snapshot(const std::string& path);

}  // namespace pmlsh
