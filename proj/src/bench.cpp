#include "pmlsh/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "pmlsh/rng.hpp"

namespace pmlsh::bench {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double resolve_c(const RunConfig& cfg, bool cp) {
    if (cfg.c > 0.0) return cfg.c;
    return cp ? 4.0 : 1.5;
}

std::size_t resolve_k(const RunConfig& cfg, bool cp) {
    if (cfg.k > 0) return cfg.k;
    return cp ? 1000 : 50;
}

PromotePolicy resolve_policy(const RunConfig& cfg) {
    if (cfg.promote == "mrad") return PromotePolicy::kMRad;
    if (cfg.promote == "random") return PromotePolicy::kRandom;
    throw std::invalid_argument("promote must be 'mrad' or 'random'");
}

Dataset load_data(const RunConfig& cfg) {
    if (!cfg.data_path.empty()) {
        if (cfg.data_path.size() >= 6 &&
            cfg.data_path.compare(cfg.data_path.size() - 6, 6, ".fvecs") == 0) {
            return load_fvecs(cfg.data_path);
        }
        return load_text(cfg.data_path, cfg.text_delimiter);
    }
    SyntheticSpec spec;
    if (cfg.synthetic == "gaussian") {
        spec.kind = SyntheticKind::kGaussian;
    } else if (cfg.synthetic == "clustered") {
        spec.kind = SyntheticKind::kClustered;
        spec.clusters = cfg.clusters;
        spec.spread = cfg.spread;
    } else {
        throw std::invalid_argument("synthetic must be 'gaussian' or 'clustered'");
    }
    return gen_synthetic(cfg.n, cfg.d, spec, cfg.seed);
}

// Deterministic choice of `count` distinct query rows.
std::vector<std::size_t> pick_queries(std::size_t n, std::size_t count, std::uint64_t seed) {
    count = std::min(count, n);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_u64(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

struct IndexedData {
    Dataset data;                  // the indexed points (queries removed in exclude mode)
    std::vector<PointId> to_orig;  // indexed row -> original row
    std::vector<std::size_t> query_rows;  // rows of the ORIGINAL dataset
};

IndexedData prepare_data(const RunConfig& cfg, const Dataset& full, bool with_queries) {
    IndexedData out;
    out.query_rows = with_queries ? pick_queries(full.n, cfg.queries, cfg.seed)
                                  : std::vector<std::size_t>{};
    if (!cfg.exclude_queries || out.query_rows.empty()) {
        out.data = full;
        out.to_orig.resize(full.n);
        for (std::size_t i = 0; i < full.n; ++i) out.to_orig[i] = static_cast<PointId>(i);
        return out;
    }
    std::vector<char> is_query(full.n, 0);
    for (std::size_t q : out.query_rows) is_query[q] = 1;
    out.data.name = full.name + "-minus-queries";
    out.data.d = full.d;
    for (std::size_t i = 0; i < full.n; ++i) {
        if (is_query[i]) continue;
        const auto r = full.row(i);
        out.data.values.insert(out.data.values.end(), r.begin(), r.end());
        out.to_orig.push_back(static_cast<PointId>(i));
        ++out.data.n;
    }
    if (out.data.n == 0) throw std::invalid_argument("exclude-queries removed every point");
    return out;
}

struct BuiltIndex {
    HashFamily family;
    std::vector<ProjectedPoint> projected;
    PMTree tree;
    double build_ms = 0.0;
};

BuiltIndex build_index(const RunConfig& cfg, const Dataset& data) {
    const auto t0 = Clock::now();
    BuiltIndex out{HashFamily::make(data.d, cfg.m, cfg.seed), {}, {}, 0.0};
    out.projected.reserve(data.n);
    for (std::size_t i = 0; i < data.n; ++i) {
        out.projected.push_back(out.family.project(data.row(i), static_cast<PointId>(i)));
    }
    // pivots come from a sample of at most 10K points
    constexpr std::size_t kPivotSample = 10000;
    PivotSet pivots;
    if (data.n <= kPivotSample) {
        pivots = select_pivots(out.projected, std::min(cfg.s, data.n), cfg.seed);
    } else {
        Rng rng(cfg.seed ^ 0x5bd1e995u);
        std::vector<ProjectedPoint> sample;
        sample.reserve(kPivotSample);
        std::vector<std::size_t> idx(data.n);
        for (std::size_t i = 0; i < data.n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < kPivotSample; ++i) {
            const std::size_t j = i + rng.uniform_u64(data.n - i);
            std::swap(idx[i], idx[j]);
            sample.push_back(out.projected[idx[i]]);
        }
        pivots = select_pivots(sample, cfg.s, cfg.seed);
    }
    out.tree = PMTree::build(out.projected, pivots, {cfg.M, resolve_policy(cfg), cfg.seed});
    out.build_ms = ms_since(t0);
    return out;
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

json index_json(const RunConfig& cfg, const PMTree& tree, double build_ms, bool timings) {
    const TreeStats st = tree.stats();
    json j{{"n", tree.size()},
           {"m", tree.dim()},
           {"s", tree.pivot_count()},
           {"M", tree.capacity()},
           {"promote", cfg.promote},
           {"height", st.height},
           {"nodes", st.node_count},
           {"leaves", st.leaf_count},
           {"mean_leaf_fill", st.mean_leaf_fill}};
    if (timings) j["build_ms"] = build_ms;
    return j;
}

json params_json(const QueryParams& p) {
    return json{{"m", p.m},         {"c", p.c},       {"alpha1", p.alpha1},
                {"t", p.t},         {"alpha2", p.alpha2}, {"beta", p.beta},
                {"t_nn", p.t_nn},   {"t_cp", p.t_cp}};
}

std::uint64_t mix_fingerprint(std::uint64_t fp, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c, std::uint64_t d) {
    auto mix = [](std::uint64_t h, std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    };
    return mix(mix(mix(mix(fp, a), b), c), d);
}

void write_output(const RunConfig& cfg, const RunReport& report) {
    if (cfg.out.empty()) return;
    std::ofstream out(cfg.out);
    if (!out) throw IoError("cannot open " + cfg.out + " for writing");
    out << report.dump() << "\n";
}

void write_csv(const RunConfig& cfg, const json& rows) {
    if (cfg.csv.empty()) return;
    std::ofstream out(cfg.csv);
    if (!out) throw IoError("cannot open " + cfg.csv + " for writing");
    out << "query,recall,ratio,probes,rounds,time_ms\n";
    for (const auto& r : rows) {
        out << r.value("query", 0) << ',' << r.value("recall", 0.0) << ','
            << r.value("ratio", 0.0) << ',' << r.value("probes", 0) << ','
            << r.value("rounds", 0) << ',' << r.value("time_ms", 0.0) << "\n";
    }
}

}  // namespace

std::size_t resolve_threads(const RunConfig& cfg) {
    std::size_t t = cfg.threads;
    if (t == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        t = hw == 0 ? 1 : hw;
    }
    if (const char* env = std::getenv("PMLSH_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) t = std::min<std::size_t>(t, static_cast<std::size_t>(cap));
    }
    return std::max<std::size_t>(1, t);
}

RunConfig config_from_json(const json& j, RunConfig base) {
    RunConfig c = std::move(base);
    auto s = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    s("data", c.data_path);
    s("synthetic", c.synthetic);
    s("n", c.n);
    s("d", c.d);
    s("clusters", c.clusters);
    s("spread", c.spread);
    s("algorithm", c.algorithm);
    s("m", c.m);
    s("s", c.s);
    s("M", c.M);
    s("c", c.c);
    s("k", c.k);
    s("alpha1", c.alpha1);
    s("prob-gamma", c.prob_gamma);
    s("promote", c.promote);
    s("seed", c.seed);
    s("queries", c.queries);
    s("repeats", c.repeats);
    s("exclude-queries", c.exclude_queries);
    s("sample-pairs", c.sample_pairs);
    s("gamma-sample", c.gamma_sample);
    s("bc-radius", c.bc_radius);
    s("rmin-shrink", c.rmin_shrink);
    s("out", c.out);
    s("csv", c.csv);
    s("snapshot", c.snapshot);
    s("truth-cache", c.truth_cache);
    s("oracle-task", c.oracle_task);
    s("emit-timings", c.emit_timings);
    s("threads", c.threads);
    return c;
}

json config_to_json(const RunConfig& cfg) {
    return json{{"data", cfg.data_path},
                {"synthetic", cfg.synthetic},
                {"n", cfg.n},
                {"d", cfg.d},
                {"clusters", cfg.clusters},
                {"spread", cfg.spread},
                {"algorithm", cfg.algorithm},
                {"m", cfg.m},
                {"s", cfg.s},
                {"M", cfg.M},
                {"c", cfg.c},
                {"k", cfg.k},
                {"alpha1", cfg.alpha1},
                {"prob-gamma", cfg.prob_gamma},
                {"promote", cfg.promote},
                {"seed", cfg.seed},
                {"queries", cfg.queries},
                {"repeats", cfg.repeats},
                {"exclude-queries", cfg.exclude_queries},
                {"sample-pairs", cfg.sample_pairs},
                {"gamma-sample", cfg.gamma_sample},
                {"rmin-shrink", cfg.rmin_shrink}};
}

RunReport run_build(const RunConfig& cfg) {
    const Dataset data = load_data(cfg);
    const BuiltIndex index = build_index(cfg, data);
    if (!cfg.snapshot.empty()) {
        save_snapshot(index.tree, data.d, cfg.seed, cfg.snapshot);
    }
    RunReport rep;
    rep.body = json{{"command", "build"},
                    {"config", config_to_json(cfg)},
                    {"index", index_json(cfg, index.tree, index.build_ms, cfg.emit_timings)},
                    {"snapshot", cfg.snapshot}};
    write_output(cfg, rep);
    return rep;
}

RunReport run_ann(const RunConfig& cfg) {
    const bool cp = false;
    const double c = resolve_c(cfg, cp);
    const std::size_t k = resolve_k(cfg, cp);
    const Dataset full = load_data(cfg);
    IndexedData prep = prepare_data(cfg, full, true);
    const Dataset& data = prep.data;
    const BuiltIndex index = build_index(cfg, data);

    const QueryParams params = solve_query_params(cfg.m, c, cfg.alpha1, data.n,
                                                  std::min(k, data.n));
    const DistanceDistribution F =
        DistanceDistribution::from_dataset(data, cfg.sample_pairs, cfg.seed);
    const double r_min = select_rmin(F, params, data.n, params.k, cfg.rmin_shrink);
    AnnSearcher searcher(index.tree, index.family, data, params);

    // Ground truth: exact kNN over the indexed points.
    const auto t_oracle = Clock::now();
    const std::size_t want = std::min(k, data.n);
    std::vector<std::vector<Neighbor>> truth(prep.query_rows.size());
    bool cache_used = false;
    const std::uint64_t fp = mix_fingerprint(dataset_fingerprint(data), cfg.seed,
                                             cfg.queries, want, cfg.exclude_queries);
    if (!cfg.truth_cache.empty()) {
        try {
            GroundTruth gt = load_ground_truth(cfg.truth_cache);
            if (gt.dataset_fingerprint == fp && gt.k == want &&
                gt.knn.size() == prep.query_rows.size()) {
                truth = gt.knn;
                cache_used = true;
            }
        } catch (const IoError&) {
            // unusable cache: recompute below
        }
    }
    if (!cache_used) {
        parallel_for(prep.query_rows.size(), resolve_threads(cfg), [&](std::size_t i) {
            truth[i] = exact_knn(data, full.row(prep.query_rows[i]), want);
        });
        if (!cfg.truth_cache.empty()) {
            GroundTruth gt;
            gt.k = static_cast<std::uint32_t>(want);
            gt.dataset_fingerprint = fp;
            gt.knn = truth;
            save_ground_truth(gt, cfg.truth_cache);
        }
    }
    const double oracle_ms = ms_since(t_oracle);

    struct Row {
        AnnResult result;
        double recall = 0.0;
        RatioResult ratio;
        double time_ms = 0.0;
    };
    std::vector<Row> rows(prep.query_rows.size());
    const std::size_t threads = resolve_threads(cfg);

    if (!prep.query_rows.empty()) {  // warm-up pass, excluded from timing
        (void)searcher.ann_query(full.row(prep.query_rows[0]), want, r_min);
    }
    for (std::size_t rep = 0; rep < std::max<std::size_t>(1, cfg.repeats); ++rep) {
        parallel_for(prep.query_rows.size(), threads, [&](std::size_t i) {
            const auto q = full.row(prep.query_rows[i]);
            const auto t0 = Clock::now();
            AnnResult r = searcher.ann_query(q, want, r_min);
            rows[i].time_ms += ms_since(t0);
            rows[i].result = std::move(r);
        });
    }

    json qrows = json::array();
    double sum_recall = 0.0, sum_ratio = 0.0, sum_time = 0.0, sum_rounds = 0.0;
    std::size_t sum_probes = 0, degenerate = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Row& row = rows[i];
        row.time_ms /= static_cast<double>(std::max<std::size_t>(1, cfg.repeats));
        row.recall = recall_with_ties(row.result.neighbors, truth[i]);
        std::vector<double> rd, td;
        for (const auto& nb : row.result.neighbors) rd.push_back(nb.dist);
        for (const auto& nb : truth[i]) td.push_back(nb.dist);
        rd.resize(td.size(), std::numeric_limits<double>::infinity());
        row.ratio = overall_ratio(rd, td);
        sum_recall += row.recall;
        sum_ratio += row.ratio.ratio;
        sum_time += row.time_ms;
        sum_probes += row.result.probes;
        sum_rounds += static_cast<double>(row.result.rounds);
        degenerate += row.ratio.degenerate;
        json jr{{"query", prep.query_rows[i]},
                {"recall", row.recall},
                {"ratio", row.ratio.ratio},
                {"probes", row.result.probes},
                {"rounds", row.result.rounds}};
        if (cfg.emit_timings) jr["time_ms"] = row.time_ms;
        qrows.push_back(std::move(jr));
    }
    const double nq = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    json agg{{"mean_recall", sum_recall / nq},
             {"mean_ratio", sum_ratio / nq},
             {"mean_probes", static_cast<double>(sum_probes) / nq},
             {"mean_rounds", sum_rounds / nq},
             {"degenerate_positions", degenerate}};
    if (cfg.emit_timings) agg["mean_time_ms"] = sum_time / nq;

    RunReport rep;
    rep.body = json{{"command", "ann"},
                    {"config", config_to_json(cfg)},
                    {"params", params_json(params)},
                    {"r_min", r_min},
                    {"index", index_json(cfg, index.tree, index.build_ms, cfg.emit_timings)},
                    {"oracle", json{{"source", cache_used ? "cache" : "computed"}}},
                    {"queries", qrows},
                    {"aggregate", agg}};
    if (cfg.emit_timings) rep.body["oracle"]["time_ms"] = oracle_ms;
    write_output(cfg, rep);
    write_csv(cfg, qrows);
    return rep;
}

RunReport run_bc(const RunConfig& cfg) {
    const double c = resolve_c(cfg, false);
    const Dataset full = load_data(cfg);
    IndexedData prep = prepare_data(cfg, full, true);
    const Dataset& data = prep.data;
    const BuiltIndex index = build_index(cfg, data);
    const QueryParams params = solve_query_params(cfg.m, c, cfg.alpha1, data.n, 1);
    AnnSearcher searcher(index.tree, index.family, data, params);

    json qrows = json::array();
    std::size_t found = 0, within = 0;
    for (std::size_t qi : prep.query_rows) {
        const auto q = full.row(qi);
        double r = cfg.bc_radius;
        if (r <= 0.0) {
            // decision radius: the query's exact NN distance (skip self-matches)
            const auto nn = exact_knn(data, q, std::min<std::size_t>(2, data.n));
            r = nn[0].dist > 0.0 ? nn[0].dist : (nn.size() > 1 ? nn[1].dist : 1.0);
            if (r <= 0.0) r = 1.0;
        }
        const auto hit = searcher.bc_query(q, r);
        json jr{{"query", qi}, {"radius", r}, {"found", hit.has_value()}};
        if (hit) {
            ++found;
            jr["id"] = hit->id;
            jr["dist"] = hit->dist;
            if (hit->dist <= c * r) ++within;
        }
        qrows.push_back(std::move(jr));
    }
    const double nq = prep.query_rows.empty() ? 1.0 : static_cast<double>(prep.query_rows.size());
    RunReport rep;
    rep.body = json{{"command", "bc"},
                    {"config", config_to_json(cfg)},
                    {"params", params_json(params)},
                    {"index", index_json(cfg, index.tree, index.build_ms, cfg.emit_timings)},
                    {"queries", qrows},
                    {"aggregate", json{{"found_rate", static_cast<double>(found) / nq},
                                       {"success_rate", static_cast<double>(within) / nq}}}};
    write_output(cfg, rep);
    return rep;
}

RunReport run_cp(const RunConfig& cfg) {
    const bool bnb = cfg.algorithm == "cp-bnb";
    const double c = resolve_c(cfg, true);
    const std::size_t k = resolve_k(cfg, true);
    const Dataset data = load_data(cfg);
    const BuiltIndex index = build_index(cfg, data);
    const std::size_t total_pairs = data.n * (data.n - 1) / 2;
    const std::size_t want = std::min(k, total_pairs);
    const QueryParams params = solve_query_params(cfg.m, c, cfg.alpha1, data.n, want);

    // Ground truth (cacheable).
    const auto t_oracle = Clock::now();
    std::vector<PairNeighbor> truth;
    bool cache_used = false;
    const std::uint64_t fp =
        mix_fingerprint(dataset_fingerprint(data), want, 0xc9, 0, 0);
    if (!cfg.truth_cache.empty()) {
        try {
            GroundTruth gt = load_ground_truth(cfg.truth_cache);
            if (gt.dataset_fingerprint == fp && gt.k == want && gt.kcp.size() == want) {
                truth = gt.kcp;
                cache_used = true;
            }
        } catch (const IoError&) {
        }
    }
    if (!cache_used) {
        truth = exact_kcp(data, want);
        if (!cfg.truth_cache.empty()) {
            GroundTruth gt;
            gt.k = static_cast<std::uint32_t>(want);
            gt.dataset_fingerprint = fp;
            gt.kcp = truth;
            save_ground_truth(gt, cfg.truth_cache);
        }
    }
    const double oracle_ms = ms_since(t_oracle);

    RunReport rep;
    rep.body = json{{"command", bnb ? "cp-bnb" : "cp-filter"},
                    {"config", config_to_json(cfg)},
                    {"params", params_json(params)},
                    {"index", index_json(cfg, index.tree, index.build_ms, cfg.emit_timings)},
                    {"oracle", json{{"source", cache_used ? "cache" : "computed"}}}};
    if (cfg.emit_timings) rep.body["oracle"]["time_ms"] = oracle_ms;

    const auto t0 = Clock::now();
    PairResult result;
    if (bnb) {
        const std::size_t T = std::min(params.t_cp, total_pairs);
        result = cp_branch_and_bound(index.tree, data, want, std::max(want, T));
    } else {
        const auto t_cal = Clock::now();
        GammaCalibration gamma =
            calibrate_gamma(data, index.family, cfg.M, cfg.prob_gamma,
                            std::min(cfg.gamma_sample, data.n), cfg.seed,
                            resolve_policy(cfg), cfg.s);
        const double cal_ms = ms_since(t_cal);
        CpFilterStats stats;
        result = cp_radius_filter(index.tree, data, want, params, gamma, &stats);
        rep.body["gamma"] = json{{"gamma", gamma.gamma},
                                 {"prob", gamma.prob},
                                 {"sample_size", gamma.sample_size},
                                 {"pairs_used", gamma.pairs_used}};
        if (cfg.emit_timings) rep.body["gamma"]["calibrate_ms"] = cal_ms;
        rep.body["filter"] = json{{"self_join_verified", stats.self_join_verified},
                                  {"filter_admitted", stats.filter_admitted},
                                  {"lca_nodes", stats.lca_nodes},
                                  {"budget_hit", stats.budget_hit}};
    }
    const double query_ms = ms_since(t0);

    std::vector<double> rd, td;
    for (const auto& p : result.pairs) rd.push_back(p.dist);
    for (const auto& p : truth) td.push_back(p.dist);
    rd.resize(td.size(), std::numeric_limits<double>::infinity());
    const double rec = pair_recall_with_ties(result.pairs, truth);
    const RatioResult ratio = overall_ratio(rd, td);

    json pairs = json::array();
    for (const auto& p : result.pairs) {
        pairs.push_back(json{{"id1", p.id1}, {"id2", p.id2}, {"dist", p.dist}});
    }
    rep.body["result"] = json{{"pairs", pairs},
                              {"verified", result.verified},
                              {"budget_t_cp", params.t_cp},
                              {"recall", rec},
                              {"ratio", ratio.ratio},
                              {"degenerate_positions", ratio.degenerate}};
    if (cfg.emit_timings) rep.body["result"]["query_ms"] = query_ms;
    write_output(cfg, rep);
    return rep;
}

RunReport run_oracle(const RunConfig& cfg) {
    if (cfg.truth_cache.empty()) {
        throw std::invalid_argument("oracle: --truth-cache is required");
    }
    const bool cp = cfg.oracle_task == "cp";
    const std::size_t k = resolve_k(cfg, cp);
    const Dataset full = load_data(cfg);
    IndexedData prep = prepare_data(cfg, full, !cp);
    const Dataset& data = prep.data;
    const std::size_t want =
        cp ? std::min(k, data.n * (data.n - 1) / 2) : std::min(k, data.n);

    const std::uint64_t fp =
        cp ? mix_fingerprint(dataset_fingerprint(data), want, 0xc9, 0, 0)
           : mix_fingerprint(dataset_fingerprint(data), cfg.seed, cfg.queries, want,
                             cfg.exclude_queries);
    bool reused = false;
    try {
        GroundTruth gt = load_ground_truth(cfg.truth_cache);
        reused = gt.dataset_fingerprint == fp && gt.k == want;
    } catch (const IoError&) {
        reused = false;
    }
    double compute_ms = 0.0;
    if (!reused) {
        const auto t0 = Clock::now();
        GroundTruth gt;
        gt.k = static_cast<std::uint32_t>(want);
        gt.dataset_fingerprint = fp;
        if (cp) {
            gt.kcp = exact_kcp(data, want);
        } else {
            gt.knn.resize(prep.query_rows.size());
            parallel_for(prep.query_rows.size(), resolve_threads(cfg), [&](std::size_t i) {
                gt.knn[i] = exact_knn(data, full.row(prep.query_rows[i]), want);
            });
        }
        save_ground_truth(gt, cfg.truth_cache);
        compute_ms = ms_since(t0);
    }
    RunReport rep;
    rep.body = json{{"command", "oracle"},
                    {"config", config_to_json(cfg)},
                    {"task", cfg.oracle_task},
                    {"k", want},
                    {"cache", cfg.truth_cache},
                    {"reused", reused}};
    if (cfg.emit_timings && !reused) rep.body["compute_ms"] = compute_ms;
    write_output(cfg, rep);
    return rep;
}

RunReport run_calibrate(const RunConfig& cfg) {
    const Dataset data = load_data(cfg);
    const HashFamily family = HashFamily::make(data.d, cfg.m, cfg.seed);
    const auto t0 = Clock::now();
    const GammaCalibration cal =
        calibrate_gamma(data, family, cfg.M, cfg.prob_gamma,
                        std::min(cfg.gamma_sample, data.n), cfg.seed, resolve_policy(cfg),
                        cfg.s);
    const double cal_ms = ms_since(t0);
    std::size_t covered = 0;
    for (float g : cal.sample) covered += g <= cal.gamma;
    const double coverage =
        cal.sample.empty() ? 0.0
                           : static_cast<double>(covered) / static_cast<double>(cal.sample.size());
    RunReport rep;
    rep.body = json{{"command", "calibrate"},
                    {"config", config_to_json(cfg)},
                    {"gamma", cal.gamma},
                    {"prob", cal.prob},
                    {"sample_size", cal.sample_size},
                    {"pairs_used", cal.pairs_used},
                    {"coverage", coverage}};
    if (cfg.emit_timings) rep.body["calibrate_ms"] = cal_ms;
    write_output(cfg, rep);
    return rep;
}

}  // namespace pmlsh::bench
