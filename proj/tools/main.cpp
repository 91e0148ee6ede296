// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver for the synthesis pipeline. Subcommands map onto the
// pipeline stages; `run` executes the whole chain. Exit codes: 0 success,
// 2 configuration error, 3 stage failure.

#include <cstdlib>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "nnsynth/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string run_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 1;
};

std::string resolve_run_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("NNSYNTH_RUN_DIR")) return env;
    return "runs/default";
}

nnsynth::Pipeline make_pipeline(const CommonArgs& args) {
    nnsynth::RunConfig config = nnsynth::load_config(args.config_path);
    if (args.seed_given) config.master_seed = args.seed;
    return nnsynth::Pipeline(config, resolve_run_dir(args.run_dir), args.workers);
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
    auto* config = cmd->add_option("--config", args.config_path, "run configuration (JSON)");
    if (needs_config) config->required();
    cmd->add_option("--run-dir", args.run_dir,
                    "run directory (default: $NNSYNTH_RUN_DIR or runs/default)");
    cmd->add_option("--seed", args.seed, "master seed override")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_option("--workers", args.workers, "parallel training workers");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthesis of compact feed-forward classifiers by predictor-guided "
                 "evolutionary search plus grow-and-prune refinement"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string force_stage;

    auto* pool = app.add_subcommand("pool", "generate the Sobol architecture pool");
    add_common(pool, args);
    auto* select = app.add_subcommand("select",
                                      "iterative sample selection and predictor training");
    add_common(select, args);
    auto* search = app.add_subcommand("search", "global evolutionary search and GS finalize");
    add_common(search, args);
    auto* local = app.add_subcommand("local", "grow-and-prune local search on the GS winner");
    add_common(local, args);
    auto* run = app.add_subcommand("run", "execute the full pipeline");
    add_common(run, args);
    run->add_option("--force-stage", force_stage,
                    "re-run from this stage even if marked done");

    auto* report = app.add_subcommand("report", "print the run summary");
    add_common(report, args);

    std::string eval_network, eval_data, eval_label = "label";
    int eval_bits = 32;
    auto* eval = app.add_subcommand("eval", "evaluate a serialized network on a CSV dataset");
    eval->add_option("--network", eval_network, "network JSON file")->required();
    eval->add_option("--data", eval_data, "labeled CSV file")->required();
    eval->add_option("--label-column", eval_label, "label column name");
    eval->add_option("--bits", eval_bits, "inference quantization bits (4/8/16/32)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (eval->parsed()) {
            const auto doc = [&] {
                std::ifstream in(eval_network);
                if (!in) throw nnsynth::ConfigError("cannot open " + eval_network);
                nlohmann::json j;
                in >> j;
                return j;
            }();
            nnsynth::SparseNetwork net = nnsynth::network_from_json(doc);
            const nnsynth::RawTable table = nnsynth::read_labeled_csv(eval_data, eval_label);
            const auto triple = nnsynth::finalize_splits(table, table, table);
            const auto quantized = nnsynth::quantize(net, nnsynth::QuantSpec{eval_bits});
            const double acc = nnsynth::evaluate(quantized, triple.train);
            std::cout << "accuracy " << acc << "\n"
                      << "active_params " << quantized.active_weights() << "\n";
            return 0;
        }

        if (report->parsed()) {
            if (args.config_path.empty())
                throw nnsynth::ConfigError("report needs --config to locate the run");
            nnsynth::Pipeline pipeline = make_pipeline(args);
            const auto doc = pipeline.read_json("report.json");
            std::cout << nnsynth::render_report(doc);
            std::cout << "stages:";
            for (const auto& [stage, status] : pipeline.manifest().stages)
                std::cout << ' ' << stage << '=' << status;
            std::cout << '\n';
            return 0;
        }

        nnsynth::Pipeline pipeline = make_pipeline(args);
        if (pool->parsed()) {
            pipeline.stage_pool();
        } else if (select->parsed()) {
            pipeline.stage_pool();
            pipeline.stage_samples();
        } else if (search->parsed()) {
            pipeline.stage_global();
        } else if (local->parsed()) {
            pipeline.stage_local();
        } else if (run->parsed()) {
            std::set<std::string> force;
            if (!force_stage.empty()) force.insert(force_stage);
            pipeline.run_all(force);
            const auto doc = pipeline.read_json("report.json");
            std::cout << nnsynth::render_report(doc);
        }
        std::cout << "run dir: " << pipeline.dir().string() << '\n';
        return 0;
    } catch (const nnsynth::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "stage failure: " << e.what() << '\n';
        return 3;
    }
}
