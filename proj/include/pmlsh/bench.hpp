#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pmlsh/ann.hpp"
#include "pmlsh/cp.hpp"
#include "pmlsh/data.hpp"
#include "pmlsh/pmtree.hpp"

namespace pmlsh::bench {

using json = nlohmann::json;

// One experiment's knobs. Defaults follow the paper's settings: m=15, s=5,
// M=16, alpha1=1/e, Pr(gamma)=0.85, c=1.5/k=50 for NN and c=4/k=1000 for CP
// (applied per command when the field is left at zero).
struct RunConfig {
    // data source: a file path (fvecs or delimiter-separated text) or a
    // synthetic spec.
    std::string data_path;
    char text_delimiter = ' ';
    std::string synthetic = "gaussian";  // gaussian | clustered
    std::size_t n = 10000;
    std::size_t d = 50;
    std::size_t clusters = 10;
    double spread = 1.0;

    std::string algorithm = "ann";  // ann | bc | cp-bnb | cp-filter | oracle
    unsigned m = 15;
    std::size_t s = 5;
    std::size_t M = 16;
    double c = 0.0;       // 0 -> 1.5 for NN commands, 4 for CP commands
    std::size_t k = 0;    // 0 -> 50 for NN commands, 1000 for CP commands
    double alpha1 = 0.36787944117144233;  // 1/e
    double prob_gamma = 0.85;
    std::string promote = "mrad";  // mrad | random
    std::uint64_t seed = 1;
    std::size_t queries = 200;
    std::size_t repeats = 1;
    bool exclude_queries = false;
    std::size_t sample_pairs = 100000;  // F(x) sample size
    std::size_t gamma_sample = 10000;
    double bc_radius = 0.0;  // 0 -> per-query exact NN distance
    double rmin_shrink = 0.9;

    std::string out;          // report destination; empty -> stdout
    std::string csv;          // optional per-query rows
    std::string snapshot;     // build command: snapshot output path
    std::string truth_cache;  // oracle cache path
    std::string oracle_task = "knn";  // oracle command: knn | cp
    bool emit_timings = true;
    std::size_t threads = 0;  // 0 -> hardware, capped by PMLSH_THREADS
};

RunConfig config_from_json(const json& j, RunConfig base = {});
json config_to_json(const RunConfig& cfg);

struct RunReport {
    json body;

    std::string dump() const { return body.dump(2); }
};

RunReport run_build(const RunConfig& cfg);
RunReport run_ann(const RunConfig& cfg);
RunReport run_bc(const RunConfig& cfg);
RunReport run_cp(const RunConfig& cfg);
RunReport run_oracle(const RunConfig& cfg);
RunReport run_calibrate(const RunConfig& cfg);

// Resolved worker count: cfg.threads, else hardware concurrency, both
// capped by PMLSH_THREADS.
std::size_t resolve_threads(const RunConfig& cfg);

}  // namespace pmlsh::bench
