#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmlsh/bench.hpp"
#include "pmlsh/data.hpp"

namespace {

// Exit codes: 0 success, 2 config error, 3 IO error, 4 internal failure.
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitInternal = 4;

using pmlsh::bench::RunConfig;

void add_common_options(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON file with defaults for any flag");
    cmd->add_option("--data", cfg.data_path, "dataset path (.fvecs or delimited text)");
    cmd->add_option("--delimiter", cfg.text_delimiter, "text delimiter (default whitespace)");
    cmd->add_option("--synthetic", cfg.synthetic, "synthetic kind: gaussian|clustered");
    cmd->add_option("--n", cfg.n, "synthetic cardinality");
    cmd->add_option("--d", cfg.d, "synthetic dimensionality");
    cmd->add_option("--clusters", cfg.clusters, "clustered: blob count");
    cmd->add_option("--spread", cfg.spread, "clustered: per-blob std");
    cmd->add_option("--m", cfg.m, "projection count (default 15)");
    cmd->add_option("--s", cfg.s, "pivot count (default 5)");
    cmd->add_option("--capacity,--M", cfg.M, "node capacity M (default 16)");
    cmd->add_option("--c", cfg.c, "approximation ratio (default 1.5 NN / 4 CP)");
    cmd->add_option("--k", cfg.k, "result size (default 50 NN / 1000 CP)");
    cmd->add_option("--alpha1", cfg.alpha1, "miss probability alpha1 (default 1/e)");
    cmd->add_option("--prob-gamma", cfg.prob_gamma, "gamma coverage target (default 0.85)");
    cmd->add_option("--promote", cfg.promote, "split promotion: mrad|random");
    cmd->add_option("--seed", cfg.seed, "RNG seed");
    cmd->add_option("--queries", cfg.queries, "query count (default 200)");
    cmd->add_option("--repeats", cfg.repeats, "timing repeats (default 1)");
    cmd->add_flag("--exclude-queries", cfg.exclude_queries,
                  "remove query points from the index");
    cmd->add_option("--sample-pairs", cfg.sample_pairs, "F(x) sample pairs (default 100000)");
    cmd->add_option("--gamma-sample", cfg.gamma_sample, "gamma calibration sample size");
    cmd->add_option("--rmin-shrink", cfg.rmin_shrink, "r_min shrink factor (default 0.9)");
    cmd->add_option("--out", cfg.out, "write the JSON report here (default stdout)");
    cmd->add_option("--csv", cfg.csv, "write per-query rows as CSV");
    cmd->add_option("--snapshot", cfg.snapshot, "index snapshot path");
    cmd->add_option("--truth-cache", cfg.truth_cache, "ground-truth cache path");
    cmd->add_flag("--no-timings{false}", cfg.emit_timings, "omit timing fields");
    cmd->add_option("--threads", cfg.threads, "worker threads (0 = auto)");
}

RunConfig finalize_config(const CLI::App* cmd, const RunConfig& cli_values,
                          const std::string& config_path) {
    if (config_path.empty()) return cli_values;
    std::ifstream in(config_path);
    if (!in) throw pmlsh::IoError("cannot open config file " + config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(config_path + ": " + e.what());
    }
    // JSON supplies defaults; explicit command-line flags win.
    RunConfig merged = pmlsh::bench::config_from_json(j);
    auto keep = [&](const std::string& flag, auto member) {
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        if (opt != nullptr && opt->count() > 0) merged.*member = cli_values.*member;
    };
    keep("--data", &RunConfig::data_path);
    keep("--synthetic", &RunConfig::synthetic);
    keep("--n", &RunConfig::n);
    keep("--d", &RunConfig::d);
    keep("--clusters", &RunConfig::clusters);
    keep("--spread", &RunConfig::spread);
    keep("--m", &RunConfig::m);
    keep("--s", &RunConfig::s);
    keep("--capacity", &RunConfig::M);
    keep("--c", &RunConfig::c);
    keep("--k", &RunConfig::k);
    keep("--alpha1", &RunConfig::alpha1);
    keep("--prob-gamma", &RunConfig::prob_gamma);
    keep("--promote", &RunConfig::promote);
    keep("--seed", &RunConfig::seed);
    keep("--queries", &RunConfig::queries);
    keep("--repeats", &RunConfig::repeats);
    keep("--exclude-queries", &RunConfig::exclude_queries);
    keep("--sample-pairs", &RunConfig::sample_pairs);
    keep("--gamma-sample", &RunConfig::gamma_sample);
    keep("--rmin-shrink", &RunConfig::rmin_shrink);
    keep("--out", &RunConfig::out);
    keep("--csv", &RunConfig::csv);
    keep("--snapshot", &RunConfig::snapshot);
    keep("--truth-cache", &RunConfig::truth_cache);
    keep("--no-timings", &RunConfig::emit_timings);
    keep("--threads", &RunConfig::threads);
    keep("--task", &RunConfig::oracle_task);
    keep("--radius", &RunConfig::bc_radius);
    keep("--delimiter", &RunConfig::text_delimiter);
    return merged;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PM-LSH: projected metric-tree LSH for ANN and closest-pair search"};
    app.require_subcommand(1);

    struct Cmd {
        CLI::App* sub;
        RunConfig cfg;
        std::string config_path;
        std::string algorithm;
    };
    std::vector<Cmd> cmds;
    cmds.reserve(6);
    auto add = [&](const char* name, const char* desc, const char* algorithm) -> Cmd& {
        cmds.push_back({app.add_subcommand(name, desc), {}, {}, algorithm});
        Cmd& c = cmds.back();
        add_common_options(c.sub, c.cfg, c.config_path);
        return c;
    };
    add("build", "build a PM-tree index and write a snapshot", "build");
    add("ann", "(c,k)-ANN benchmark against the exact oracle", "ann");
    add("bc", "(r,c)-ball-cover queries", "bc");
    Cmd& cp = add("cp", "(c,k)-closest-pair benchmark", "cp-filter");
    std::string cp_algo = "filter";
    cp.sub->add_option("--algo", cp_algo, "cp algorithm: filter|bnb");
    Cmd& oracle = add("oracle", "compute and cache exact ground truth", "oracle");
    oracle.sub->add_option("--task", oracle.cfg.oracle_task, "knn|cp");
    add("calibrate", "calibrate the gamma filtering ratio", "calibrate");

    std::string bc_radius_help = "ball-cover radius (0 = per-query exact NN distance)";
    for (auto& c : cmds) {
        if (c.algorithm == "bc") c.sub->add_option("--radius", c.cfg.bc_radius, bc_radius_help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        for (auto& c : cmds) {
            if (!c.sub->parsed()) continue;
            RunConfig cfg = finalize_config(c.sub, c.cfg, c.config_path);
            cfg.algorithm = c.algorithm;
            if (c.algorithm == "cp-filter" && cp_algo == "bnb") cfg.algorithm = "cp-bnb";
            pmlsh::bench::RunReport report;
            if (cfg.algorithm == "build") {
                report = pmlsh::bench::run_build(cfg);
            } else if (cfg.algorithm == "ann") {
                report = pmlsh::bench::run_ann(cfg);
            } else if (cfg.algorithm == "bc") {
                report = pmlsh::bench::run_bc(cfg);
            } else if (cfg.algorithm == "cp-bnb" || cfg.algorithm == "cp-filter") {
                report = pmlsh::bench::run_cp(cfg);
            } else if (cfg.algorithm == "oracle") {
                report = pmlsh::bench::run_oracle(cfg);
            } else if (cfg.algorithm == "calibrate") {
                report = pmlsh::bench::run_calibrate(cfg);
            }
            if (cfg.out.empty()) std::cout << report.dump() << "\n";
            return 0;
        }
        std::cerr << "no subcommand given\n";
        return kExitConfig;
    } catch (const pmlsh::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
