#include "pmlsh/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <queue>
#include <unordered_set>

#include "pmlsh/rng.hpp"

namespace pmlsh {

namespace {

void check_finite(const Dataset& ds) {
    for (double v : ds.values) {
        if (!std::isfinite(v)) throw IoError(ds.name + ": non-finite value in dataset");
    }
}

std::uint64_t pair_key(PointId a, PointId b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

Dataset load_fvecs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    Dataset ds;
    ds.name = path;
    std::int32_t d32 = 0;
    std::size_t index = 0;
    while (in.read(reinterpret_cast<char*>(&d32), sizeof(d32))) {
        if (d32 <= 0 || d32 > 1000000) {
            throw IoError(path + ": vector " + std::to_string(index) +
                          " declares implausible dimension " + std::to_string(d32));
        }
        const auto d = static_cast<std::size_t>(d32);
        if (index == 0) {
            ds.d = d;
        } else if (d != ds.d) {
            throw IoError(path + ": vector " + std::to_string(index) + " has dimension " +
                          std::to_string(d) + ", expected " + std::to_string(ds.d));
        }
        std::vector<float> buf(d);
        if (!in.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(d * sizeof(float)))) {
            throw IoError(path + ": truncated vector " + std::to_string(index));
        }
        for (float v : buf) ds.values.push_back(static_cast<double>(v));
        ++index;
    }
    if (index == 0) throw IoError(path + ": empty fvecs file");
    ds.n = index;
    check_finite(ds);
    return ds;
}

void write_fvecs(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const auto d32 = static_cast<std::int32_t>(ds.d);
    std::vector<float> buf(ds.d);
    for (std::size_t i = 0; i < ds.n; ++i) {
        out.write(reinterpret_cast<const char*>(&d32), sizeof(d32));
        const auto r = ds.row(i);
        for (std::size_t j = 0; j < ds.d; ++j) buf[j] = static_cast<float>(r[j]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(ds.d * sizeof(float)));
    }
    if (!out) throw IoError("write failed: " + path);
}

Dataset load_text(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Dataset ds;
    ds.name = path;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        const char* p = line.c_str();
        const char* end = p + line.size();
        while (p < end) {
            if (delimiter == ' ') {
                while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
                if (p >= end) break;
            }
            char* next = nullptr;
            const double v = std::strtod(p, &next);
            if (next == p) {
                throw IoError(path + ":" + std::to_string(lineno) + ": parse error near '" +
                              std::string(p, std::min<std::size_t>(8, end - p)) + "'");
            }
            row.push_back(v);
            p = next;
            if (delimiter != ' ') {
                while (p < end && (*p == ' ' || *p == '\r')) ++p;
                if (p < end) {
                    if (*p != delimiter) {
                        throw IoError(path + ":" + std::to_string(lineno) +
                                      ": expected delimiter");
                    }
                    ++p;
                }
            }
        }
        if (row.empty()) continue;
        if (ds.d == 0) {
            ds.d = row.size();
        } else if (row.size() != ds.d) {
            throw IoError(path + ":" + std::to_string(lineno) + ": row has " +
                          std::to_string(row.size()) + " values, expected " +
                          std::to_string(ds.d));
        }
        ds.values.insert(ds.values.end(), row.begin(), row.end());
        ++ds.n;
    }
    if (ds.n == 0) throw IoError(path + ": no vectors found");
    check_finite(ds);
    return ds;
}

Dataset gen_synthetic(std::size_t n, std::size_t d, const SyntheticSpec& spec,
                      std::uint64_t seed) {
    if (n == 0 || d == 0) throw std::invalid_argument("gen_synthetic: n, d must be >= 1");
    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.values.resize(n * d);
    Rng rng(seed);
    if (spec.kind == SyntheticKind::kGaussian) {
        ds.name = "gaussian-" + std::to_string(n) + "x" + std::to_string(d);
        for (double& v : ds.values) v = rng.normal();
    } else {
        if (spec.clusters == 0) throw std::invalid_argument("gen_synthetic: clusters must be >= 1");
        if (spec.spread < 0.0) throw std::invalid_argument("gen_synthetic: spread must be >= 0");
        ds.name = "clustered-" + std::to_string(n) + "x" + std::to_string(d);
        std::vector<double> centers(spec.clusters * d);
        for (double& v : centers) v = rng.uniform_real(0.0, 100.0);
        // blob membership in contiguous blocks
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = std::min(i * spec.clusters / n, spec.clusters - 1);
            for (std::size_t j = 0; j < d; ++j) {
                ds.values[i * d + j] = centers[c * d + j] + spec.spread * rng.normal();
            }
        }
    }
    return ds;
}

double euclidean_sq(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        acc += t * t;
    }
    return acc;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(euclidean_sq(a, b));
}

std::vector<Neighbor> exact_knn(const Dataset& ds, std::span<const double> q, std::size_t k) {
    if (k > ds.n) throw std::invalid_argument("exact_knn: k exceeds dataset size");
    std::vector<Neighbor> all(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) {
        all[i] = {static_cast<PointId>(i), euclidean(ds.row(i), q)};
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                          return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
                      });
    all.resize(k);
    return all;
}

std::vector<PairNeighbor> exact_kcp(const Dataset& ds, std::size_t k) {
    const std::size_t total = ds.n * (ds.n - 1) / 2;
    if (k > total) throw std::invalid_argument("exact_kcp: k exceeds pair count");
    auto worse = [](const PairNeighbor& a, const PairNeighbor& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.id1 != b.id1) return a.id1 < b.id1;
        return a.id2 < b.id2;
    };
    // max-heap of the best k so far
    std::priority_queue<PairNeighbor, std::vector<PairNeighbor>, decltype(worse)> heap(worse);
    for (std::size_t i = 0; i + 1 < ds.n; ++i) {
        const auto ri = ds.row(i);
        for (std::size_t j = i + 1; j < ds.n; ++j) {
            const double dist = euclidean(ri, ds.row(j));
            PairNeighbor pn{static_cast<PointId>(i), static_cast<PointId>(j), dist};
            if (heap.size() < k) {
                heap.push(pn);
            } else if (worse(pn, heap.top())) {
                heap.pop();
                heap.push(pn);
            }
        }
    }
    std::vector<PairNeighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = heap.top();
        heap.pop();
    }
    return out;
}

double recall(std::span<const PointId> result_ids, std::span<const PointId> truth_ids) {
    if (truth_ids.empty()) throw std::invalid_argument("recall: empty truth");
    std::unordered_set<PointId> truth(truth_ids.begin(), truth_ids.end());
    std::size_t hits = 0;
    for (PointId id : result_ids) hits += truth.count(id);
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double pair_recall(std::span<const PairNeighbor> result, std::span<const PairNeighbor> truth) {
    if (truth.empty()) throw std::invalid_argument("pair_recall: empty truth");
    std::unordered_set<std::uint64_t> keys;
    for (const auto& t : truth) keys.insert(pair_key(t.id1, t.id2));
    std::size_t hits = 0;
    for (const auto& r : result) hits += keys.count(pair_key(r.id1, r.id2));
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double recall_with_ties(std::span<const Neighbor> result, std::span<const Neighbor> truth) {
    if (truth.empty()) throw std::invalid_argument("recall_with_ties: empty truth");
    std::unordered_set<PointId> ids;
    for (const auto& t : truth) ids.insert(t.id);
    const double kth = truth.back().dist;
    std::size_t hits = 0;
    for (const auto& r : result) {
        if (ids.count(r.id) || r.dist <= kth) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double pair_recall_with_ties(std::span<const PairNeighbor> result,
                             std::span<const PairNeighbor> truth) {
    if (truth.empty()) throw std::invalid_argument("pair_recall_with_ties: empty truth");
    std::unordered_set<std::uint64_t> keys;
    for (const auto& t : truth) keys.insert(pair_key(t.id1, t.id2));
    const double kth = truth.back().dist;
    std::size_t hits = 0;
    for (const auto& r : result) {
        if (keys.count(pair_key(r.id1, r.id2)) || r.dist <= kth) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

RatioResult overall_ratio(std::span<const double> result_dists,
                          std::span<const double> truth_dists) {
    if (result_dists.size() != truth_dists.size()) {
        throw std::invalid_argument("overall_ratio: length mismatch");
    }
    RatioResult rr;
    double sum = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < result_dists.size(); ++i) {
        if (truth_dists[i] == 0.0) {
            ++rr.degenerate;
            if (result_dists[i] == 0.0) {
                sum += 1.0;
                ++valid;
            } else {
                rr.infinite = true;
            }
        } else {
            sum += result_dists[i] / truth_dists[i];
            ++valid;
        }
    }
    rr.ratio = valid > 0 ? sum / static_cast<double>(valid) : 1.0;
    return rr;
}

namespace {

constexpr char kGtMagic[4] = {'P', 'M', 'G', 'T'};
constexpr std::uint32_t kGtVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw IoError(std::string("ground-truth cache truncated at ") + what);
    }
    return v;
}

}  // namespace

void save_ground_truth(const GroundTruth& gt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kGtMagic, 4);
    put(out, kGtVersion);
    put(out, gt.k);
    put(out, gt.dataset_fingerprint);
    put(out, static_cast<std::uint64_t>(gt.knn.size()));
    for (const auto& list : gt.knn) {
        put(out, static_cast<std::uint64_t>(list.size()));
        for (const auto& nb : list) {
            put(out, nb.id);
            put(out, nb.dist);
        }
    }
    put(out, static_cast<std::uint64_t>(gt.kcp.size()));
    for (const auto& p : gt.kcp) {
        put(out, p.id1);
        put(out, p.id2);
        put(out, p.dist);
    }
    if (!out) throw IoError("write failed: " + path);
}

GroundTruth load_ground_truth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kGtMagic, 4) != 0) {
        throw IoError(path + ": not a ground-truth cache (bad magic)");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kGtVersion) {
        throw IoError(path + ": unsupported cache version " + std::to_string(version));
    }
    GroundTruth gt;
    gt.k = get<std::uint32_t>(in, "k");
    gt.dataset_fingerprint = get<std::uint64_t>(in, "fingerprint");
    const auto nq = get<std::uint64_t>(in, "query count");
    gt.knn.resize(nq);
    for (auto& list : gt.knn) {
        const auto len = get<std::uint64_t>(in, "list length");
        list.resize(len);
        for (auto& nb : list) {
            nb.id = get<PointId>(in, "id");
            nb.dist = get<double>(in, "dist");
        }
    }
    const auto np = get<std::uint64_t>(in, "pair count");
    gt.kcp.resize(np);
    for (auto& p : gt.kcp) {
        p.id1 = get<PointId>(in, "id1");
        p.id2 = get<PointId>(in, "id2");
        p.dist = get<double>(in, "dist");
    }
    return gt;
}

std::uint64_t dataset_fingerprint(const Dataset& ds) {
    // FNV-1a over the raw values plus the shape.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    const std::uint64_t n64 = ds.n, d64 = ds.d;
    mix(&n64, sizeof(n64));
    mix(&d64, sizeof(d64));
    mix(ds.values.data(), ds.values.size() * sizeof(double));
    return h;
}

}  // namespace pmlsh
