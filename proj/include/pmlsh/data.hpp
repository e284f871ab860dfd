#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmlsh/projection.hpp"

namespace pmlsh {

// File and format problems; the CLI maps this to its IO exit code.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    std::string name;
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> values;  // row-major n x d

    std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }
};

// fvecs layout: per vector a 32-bit little-endian count d followed by d
// 32-bit little-endian IEEE-754 floats. All vectors must share d.
Dataset load_fvecs(const std::string& path);
void write_fvecs(const Dataset& ds, const std::string& path);

// One vector per line, delimiter-separated decimal floats. delimiter ' '
// accepts any run of blanks.
Dataset load_text(const std::string& path, char delimiter = ' ');

enum class SyntheticKind { kGaussian, kClustered };

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::kGaussian;
    std::size_t clusters = 10;  // clustered only
    double spread = 1.0;        // per-blob std, clustered only
};

Dataset gen_synthetic(std::size_t n, std::size_t d, const SyntheticSpec& spec,
                      std::uint64_t seed);

double euclidean(std::span<const double> a, std::span<const double> b);
double euclidean_sq(std::span<const double> a, std::span<const double> b);

struct Neighbor {
    PointId id;
    double dist;
};

struct PairNeighbor {
    PointId id1;  // id1 < id2
    PointId id2;
    double dist;
};

// Exhaustive scans; ties broken by ascending id (pair: lexicographic).
std::vector<Neighbor> exact_knn(const Dataset& ds, std::span<const double> q, std::size_t k);
std::vector<PairNeighbor> exact_kcp(const Dataset& ds, std::size_t k);

// |result ∩ truth| / |truth| over ids.
double recall(std::span<const PointId> result_ids, std::span<const PointId> truth_ids);
double pair_recall(std::span<const PairNeighbor> result, std::span<const PairNeighbor> truth);

// Tie-tolerant variants: a result item also counts when its distance equals
// the k-th truth distance, so tie permutations are not penalized.
double recall_with_ties(std::span<const Neighbor> result, std::span<const Neighbor> truth);
double pair_recall_with_ties(std::span<const PairNeighbor> result,
                             std::span<const PairNeighbor> truth);

struct RatioResult {
    double ratio = 1.0;            // mean of position-wise ratios over valid positions
    std::size_t degenerate = 0;    // positions with zero truth distance
    bool infinite = false;         // some degenerate position had a nonzero result distance
};

RatioResult overall_ratio(std::span<const double> result_dists,
                          std::span<const double> truth_dists);

// Ground-truth cache ("PMGT"): exact kNN lists for a query set, or an exact
// kCP list. Versioned little-endian binary; loaders detect corruption.
struct GroundTruth {
    std::uint32_t k = 0;
    std::vector<std::vector<Neighbor>> knn;  // one list per query
    std::vector<PairNeighbor> kcp;
    std::uint64_t dataset_fingerprint = 0;
};

void save_ground_truth(const GroundTruth& gt, const std::string& path);
GroundTruth load_ground_truth(const std::string& path);

// Cheap content fingerprint used to detect cache/config mismatches.
std::uint64_t dataset_fingerprint(const Dataset& ds);

}  // namespace pmlsh
