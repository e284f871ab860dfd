#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pmlsh/bench.hpp"

using namespace pmlsh;
using namespace pmlsh::bench;

namespace {

RunConfig small_ann_config() {
    RunConfig cfg;
    cfg.synthetic = "gaussian";
    cfg.n = 500;
    cfg.d = 12;
    cfg.queries = 12;
    cfg.k = 5;
    cfg.sample_pairs = 10000;
    cfg.seed = 99;
    cfg.threads = 2;
    cfg.emit_timings = false;
    return cfg;
}

}  // namespace

TEST_CASE("ann reports are deterministic and internally consistent") {
    const RunConfig cfg = small_ann_config();
    const RunReport a = run_ann(cfg);
    const RunReport b = run_ann(cfg);
    CHECK(a.dump() == b.dump());

    // aggregates recompute exactly from the per-query rows
    const auto& rows = a.body.at("queries");
    double recall = 0.0, ratio = 0.0;
    for (const auto& r : rows) {
        recall += r.at("recall").get<double>();
        ratio += r.at("ratio").get<double>();
    }
    const double nq = static_cast<double>(rows.size());
    CHECK(a.body.at("aggregate").at("mean_recall").get<double>() ==
          doctest::Approx(recall / nq).epsilon(1e-12));
    CHECK(a.body.at("aggregate").at("mean_ratio").get<double>() ==
          doctest::Approx(ratio / nq).epsilon(1e-12));

    // self-queries on an indexed dataset with k=1 are perfect
    RunConfig k1 = cfg;
    k1.k = 1;
    const RunReport c = run_ann(k1);
    CHECK(c.body.at("aggregate").at("mean_recall").get<double>() == 1.0);
    CHECK(c.body.at("aggregate").at("mean_ratio").get<double>() == 1.0);
}

TEST_CASE("exclude-queries mode drops self matches") {
    RunConfig cfg = small_ann_config();
    cfg.exclude_queries = true;
    cfg.k = 3;
    const RunReport rep = run_ann(cfg);
    // every truth distance is positive now, so no degenerate positions
    CHECK(rep.body.at("aggregate").at("degenerate_positions").get<std::size_t>() == 0);
}

TEST_CASE("build report and snapshot, capacity affects height") {
    namespace fs = std::filesystem;
    RunConfig cfg;
    cfg.synthetic = "gaussian";
    cfg.n = 600;
    cfg.d = 10;
    cfg.seed = 5;
    cfg.emit_timings = false;
    cfg.snapshot = (fs::temp_directory_path() / "pmlsh_bench.snapshot").string();
    cfg.M = 16;
    const RunReport r16 = run_build(cfg);
    CHECK(fs::exists(cfg.snapshot));
    const auto snap = load_snapshot(cfg.snapshot);
    CHECK(snap.tree.size() == 600);

    RunConfig deep = cfg;
    deep.M = 2;
    deep.snapshot.clear();
    const RunReport r2 = run_build(deep);
    CHECK(r2.body.at("index").at("height").get<std::size_t>() >=
          r16.body.at("index").at("height").get<std::size_t>());
}

TEST_CASE("cp run reports budget and quality fields") {
    RunConfig cfg;
    cfg.synthetic = "clustered";
    cfg.n = 400;
    cfg.d = 10;
    cfg.clusters = 8;
    cfg.spread = 1.0;
    cfg.k = 5;
    cfg.gamma_sample = 400;
    cfg.seed = 11;
    cfg.emit_timings = false;
    cfg.algorithm = "cp-filter";
    const RunReport rep = run_cp(cfg);
    CHECK(rep.body.at("result").at("verified").get<std::size_t>() > 0);
    CHECK(rep.body.at("result").at("recall").get<double>() >= 0.0);
    CHECK(rep.body.contains("gamma"));

    RunConfig bnb = cfg;
    bnb.algorithm = "cp-bnb";
    const RunReport rep2 = run_cp(bnb);
    // tiny dataset: branch and bound with the full budget is near-exact
    CHECK(rep2.body.at("result").at("recall").get<double>() >= 0.8);
}

TEST_CASE("oracle command caches and reuses ground truth") {
    namespace fs = std::filesystem;
    RunConfig cfg;
    cfg.synthetic = "gaussian";
    cfg.n = 200;
    cfg.d = 8;
    cfg.queries = 5;
    cfg.k = 3;
    cfg.seed = 31;
    cfg.emit_timings = false;
    cfg.truth_cache = (fs::temp_directory_path() / "pmlsh_oracle.gt").string();
    std::error_code ec;
    fs::remove(cfg.truth_cache, ec);

    const RunReport first = run_oracle(cfg);
    CHECK_FALSE(first.body.at("reused").get<bool>());
    const RunReport second = run_oracle(cfg);
    CHECK(second.body.at("reused").get<bool>());

    // different k: recompute
    RunConfig other = cfg;
    other.k = 4;
    const RunReport third = run_oracle(other);
    CHECK_FALSE(third.body.at("reused").get<bool>());

    // corrupted cache: detected and recomputed
    {
        std::ofstream out(cfg.truth_cache, std::ios::binary);
        out << "garbage";
    }
    const RunReport fourth = run_oracle(other);
    CHECK_FALSE(fourth.body.at("reused").get<bool>());
}

TEST_CASE("larger c trades recall for fewer candidates") {
    RunConfig cfg = small_ann_config();
    cfg.n = 1500;
    cfg.queries = 30;
    cfg.k = 10;
    cfg.exclude_queries = true;
    cfg.c = 1.2;
    const RunReport tight = run_ann(cfg);
    cfg.c = 2.5;
    const RunReport loose = run_ann(cfg);
    const double rec_t = tight.body.at("aggregate").at("mean_recall").get<double>();
    const double rec_l = loose.body.at("aggregate").at("mean_recall").get<double>();
    const double probes_t = tight.body.at("aggregate").at("mean_probes").get<double>();
    const double probes_l = loose.body.at("aggregate").at("mean_probes").get<double>();
    CHECK(probes_l < probes_t);
    CHECK(rec_l <= rec_t + 0.02);
}

TEST_CASE("config json round trip merges fields") {
    const json j{{"n", 123}, {"m", 9}, {"promote", "random"}, {"seed", 77}};
    const RunConfig cfg = config_from_json(j);
    CHECK(cfg.n == 123);
    CHECK(cfg.m == 9);
    CHECK(cfg.promote == "random");
    CHECK(cfg.seed == 77);
    const json echo = config_to_json(cfg);
    CHECK(echo.at("n").get<std::size_t>() == 123);
    CHECK(echo.at("promote").get<std::string>() == "random");
}

TEST_CASE("PMLSH_THREADS caps the worker count") {
    RunConfig cfg;
    cfg.threads = 0;
    setenv("PMLSH_THREADS", "2", 1);
    CHECK(resolve_threads(cfg) <= 2);
    cfg.threads = 16;
    CHECK(resolve_threads(cfg) == 2);
    unsetenv("PMLSH_THREADS");
    cfg.threads = 3;
    CHECK(resolve_threads(cfg) == 3);
}
