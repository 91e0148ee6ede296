// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file pipeline.hpp End-to-end run driver: dataset ingestion, the
/// pool -> samples -> predictor -> global -> local -> final stage chain, run
/// directory persistence, and report emission. A run directory is fully
/// determined by (config, master seed); worker count and wall-clock never
/// leak into artifacts.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnsynth/dataset.hpp"
#include "nnsynth/evolve.hpp"
#include "nnsynth/gene_trainer.hpp"
#include "nnsynth/growprune.hpp"
#include "nnsynth/selector.hpp"
#include "nnsynth/sobol.hpp"

namespace nnsynth {

/// Configuration problems exit with code 2; stage failures with code 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Dataset specification and ingestion
// ---------------------------------------------------------------------------

struct DatasetSpec {
    std::string builtin;      // "blobs-<features>-<classes>"; empty selects CSV input
    std::string csv_path;     // single CSV split fractionally
    std::string train_path, val_path, test_path;  // explicit split files
    std::string label_column = "label";
    std::string normalization = "zscore";  // "zscore" or "none"
    double train_fraction = 0.7, val_fraction = 0.15, test_fraction = 0.15;
    std::uint64_t split_seed = 1;
    std::size_t rows_train = 600, rows_val = 150, rows_test = 150;  // builtin sizes
    double blob_center_scale = 1.5;
};

struct IngestResult {
    DatasetTriple data;
    std::uint64_t fingerprint = 0;
};

namespace detail {

inline bool parse_blobs_id(const std::string& id, std::size_t& dim, int& classes) {
    if (id.rfind("blobs-", 0) != 0) return false;
    const auto rest = id.substr(6);
    const auto dash = rest.find('-');
    if (dash == std::string::npos) return false;
    try {
        dim = std::stoul(rest.substr(0, dash));
        classes = std::stoi(rest.substr(dash + 1));
    } catch (const std::exception&) {
        return false;
    }
    return dim >= 1 && classes >= 2;
}

}  // namespace detail

/// Builds the normalized dataset triple. The fingerprint hashes the split
/// contents before normalization, so the same source data always maps to the
/// same run identity.
inline IngestResult ingest(const DatasetSpec& spec) {
    DatasetTriple triple;
    if (!spec.builtin.empty()) {
        std::size_t dim = 0;
        int classes = 0;
        if (!detail::parse_blobs_id(spec.builtin, dim, classes))
            throw ConfigError("unknown builtin dataset id: " + spec.builtin);
        const std::size_t total = spec.rows_train + spec.rows_val + spec.rows_test;
        const RawTable table =
            make_blobs(dim, classes, total, spec.split_seed, spec.blob_center_scale);
        auto take = [&](std::size_t begin, std::size_t count) {
            RawTable part;
            part.feature_names = table.feature_names;
            part.features = Matrix(count, table.features.cols);
            part.raw_labels.assign(table.raw_labels.begin() + static_cast<std::ptrdiff_t>(begin),
                                   table.raw_labels.begin() +
                                       static_cast<std::ptrdiff_t>(begin + count));
            for (std::size_t r = 0; r < count; ++r)
                for (std::size_t j = 0; j < table.features.cols; ++j)
                    part.features(r, j) = table.features(begin + r, j);
            return part;
        };
        triple = finalize_splits(take(0, spec.rows_train),
                                 take(spec.rows_train, spec.rows_val),
                                 take(spec.rows_train + spec.rows_val, spec.rows_test));
    } else if (!spec.train_path.empty()) {
        if (spec.val_path.empty() || spec.test_path.empty())
            throw ConfigError("given-files split needs train, val, and test paths");
        triple = finalize_splits(read_labeled_csv(spec.train_path, spec.label_column),
                                 read_labeled_csv(spec.val_path, spec.label_column),
                                 read_labeled_csv(spec.test_path, spec.label_column));
    } else if (!spec.csv_path.empty()) {
        const RawTable table = read_labeled_csv(spec.csv_path, spec.label_column);
        triple = fractional_split(table, spec.train_fraction, spec.val_fraction,
                                  spec.test_fraction, spec.split_seed);
    } else {
        throw ConfigError("dataset spec names neither a builtin nor a CSV source");
    }

    IngestResult result;
    result.fingerprint = fingerprint(triple);
    if (spec.normalization == "zscore") {
        const ZScoreStats stats = zscore_fit(triple.train);
        zscore_apply(triple.train, stats);
        zscore_apply(triple.val, stats);
        zscore_apply(triple.test, stats);
    } else if (spec.normalization != "none") {
        throw ConfigError("unknown normalization: " + spec.normalization);
    }
    result.data = std::move(triple);
    return result;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct BaselineSpec {
    bool enabled = false;
    std::vector<int> hidden;  // hidden layer widths; trained without reduction
};

struct RunConfig {
    DatasetSpec dataset;
    SearchSpace space;
    SelectorConfig selector;
    EvolveConfig evolve;
    LocalSearchConfig local;
    TrainConfig train;
    BaselineSpec baseline;
    std::uint64_t master_seed = 1;
    bool local_enabled = true;
    std::size_t scheme_a_seed_hidden = 10;
    std::string precomputed_train, precomputed_val, precomputed_test;
};

namespace detail {

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "A" || s == "a") return Scheme::A;
    if (s == "B" || s == "b") return Scheme::B;
    if (s == "C" || s == "c") return Scheme::C;
    throw ConfigError("unknown local-search scheme: " + s);
}

inline LocalOp local_op_from_string(const std::string& s) {
    if (s == "grow_conn") return LocalOp::grow_conn;
    if (s == "grow_neuron") return LocalOp::grow_neuron;
    if (s == "prune_conn") return LocalOp::prune_conn;
    throw ConfigError("unknown local-search op: " + s);
}

template <typename T>
T get_or(const nlohmann::json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) return fallback;
    return doc.at(key).get<T>();
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& doc) {
    RunConfig cfg;
    try {
        cfg.master_seed = detail::get_or<std::uint64_t>(doc, "seed", 1);

        const auto& jd = doc.at("dataset");
        cfg.dataset.builtin = detail::get_or<std::string>(jd, "builtin", "");
        cfg.dataset.csv_path = detail::get_or<std::string>(jd, "csv", "");
        cfg.dataset.train_path = detail::get_or<std::string>(jd, "train_csv", "");
        cfg.dataset.val_path = detail::get_or<std::string>(jd, "val_csv", "");
        cfg.dataset.test_path = detail::get_or<std::string>(jd, "test_csv", "");
        cfg.dataset.label_column = detail::get_or<std::string>(jd, "label_column", "label");
        cfg.dataset.normalization = detail::get_or<std::string>(jd, "normalization", "zscore");
        cfg.dataset.split_seed = detail::get_or<std::uint64_t>(jd, "split_seed", 1);
        cfg.dataset.blob_center_scale = detail::get_or<double>(jd, "center_scale", 1.5);
        if (jd.contains("rows")) {
            const auto rows = jd.at("rows").get<std::vector<std::size_t>>();
            if (rows.size() != 3) throw ConfigError("dataset.rows must have three entries");
            cfg.dataset.rows_train = rows[0];
            cfg.dataset.rows_val = rows[1];
            cfg.dataset.rows_test = rows[2];
        }
        if (jd.contains("fractions")) {
            const auto f = jd.at("fractions").get<std::vector<double>>();
            if (f.size() != 3) throw ConfigError("dataset.fractions must have three entries");
            cfg.dataset.train_fraction = f[0];
            cfg.dataset.val_fraction = f[1];
            cfg.dataset.test_fraction = f[2];
        }

        if (doc.contains("space") && doc.at("space").contains("params"))
            cfg.space = space_from_json(doc.at("space"));
        else
            cfg.space = ffnn_default_space();
        if (doc.contains("space") && doc.at("space").contains("restrict")) {
            std::vector<SpaceOverride> overrides;
            for (const auto& jo : doc.at("space").at("restrict"))
                overrides.push_back({jo.at("name").get<std::string>(),
                                     jo.at("lower").get<double>(),
                                     jo.at("upper").get<double>(),
                                     detail::get_or<double>(jo, "step", 0.0)});
            cfg.space = restrict_space(cfg.space, overrides);
        }

        if (doc.contains("selector")) {
            const auto& js = doc.at("selector");
            cfg.selector.pool_count = detail::get_or<std::size_t>(js, "pool_count", 2048);
            cfg.selector.iter_count = detail::get_or<std::size_t>(js, "iter_count", 100);
            cfg.selector.max_iterations = detail::get_or<std::size_t>(js, "max_iterations", 3);
            cfg.selector.predictor_max_depth =
                detail::get_or<int>(js, "predictor_max_depth", 5);
            cfg.selector.predictor_max_stages =
                detail::get_or<int>(js, "predictor_max_stages", 500);
        }

        if (doc.contains("evolve")) {
            const auto& je = doc.at("evolve");
            cfg.evolve.population = detail::get_or<std::size_t>(je, "population", 100);
            cfg.evolve.max_iterations = detail::get_or<std::size_t>(je, "max_iterations", 200);
            cfg.evolve.mutation_prob = detail::get_or<double>(je, "mutation_prob", 0.4);
            cfg.evolve.crossover_enabled = detail::get_or<bool>(je, "crossover", false);
        }

        if (doc.contains("train")) {
            const auto& jt = doc.at("train");
            const std::string opt = detail::get_or<std::string>(jt, "optimizer", "adam");
            if (opt == "adam")
                cfg.train.optimizer = Optimizer::adam;
            else if (opt == "sgd_momentum")
                cfg.train.optimizer = Optimizer::sgd_momentum;
            else
                throw ConfigError("unknown optimizer: " + opt);
            cfg.train.learning_rate = detail::get_or<double>(jt, "learning_rate", 0.01);
            cfg.train.momentum = detail::get_or<double>(jt, "momentum", 0.9);
            cfg.train.weight_decay = detail::get_or<double>(jt, "weight_decay", 1e-3);
            cfg.train.epochs = detail::get_or<int>(jt, "epochs", 50);
            cfg.train.batch_size = detail::get_or<int>(jt, "batch_size", 64);
        }

        if (doc.contains("local")) {
            const auto& jl = doc.at("local");
            cfg.local_enabled = detail::get_or<bool>(jl, "enabled", true);
            cfg.local.scheme =
                detail::scheme_from_string(detail::get_or<std::string>(jl, "scheme", "B"));
            cfg.local.max_iterations = detail::get_or<int>(jl, "max_iterations", 10);
            cfg.local.grow_conn_count = detail::get_or<double>(jl, "grow_conn_count", 0.05);
            cfg.local.prune_fraction = detail::get_or<double>(jl, "prune_fraction", 0.3);
            cfg.local.prune_decay = detail::get_or<double>(jl, "prune_decay", 0.7);
            const std::string pm =
                detail::get_or<std::string>(jl, "prune_mode", "small_weight");
            if (pm == "small_weight")
                cfg.local.prune_mode = PruneMode::small_weight;
            else if (pm == "large_weight")
                cfg.local.prune_mode = PruneMode::large_weight;
            else
                throw ConfigError("unknown prune_mode: " + pm);
            const std::string ng =
                detail::get_or<std::string>(jl, "neuron_growth", "duplicate");
            if (ng == "duplicate")
                cfg.local.neuron_growth_mode = NeuronGrowthMode::duplicate;
            else if (ng == "random")
                cfg.local.neuron_growth_mode = NeuronGrowthMode::random;
            else
                throw ConfigError("unknown neuron_growth: " + ng);
            cfg.local.epochs_per_iteration =
                detail::get_or<int>(jl, "epochs_per_iteration", 15);
            if (jl.contains("schedule")) {
                cfg.local.op_schedule.clear();
                for (const auto& jop : jl.at("schedule"))
                    cfg.local.op_schedule.push_back(
                        detail::local_op_from_string(jop.get<std::string>()));
            }
            cfg.scheme_a_seed_hidden =
                detail::get_or<std::size_t>(jl, "scheme_a_seed_hidden", 10);
        }

        if (doc.contains("baseline")) {
            cfg.baseline.enabled = true;
            cfg.baseline.hidden = doc.at("baseline").at("hidden").get<std::vector<int>>();
        }

        if (doc.contains("precomputed")) {
            const auto& jp = doc.at("precomputed");
            cfg.precomputed_train = jp.at("train").get<std::string>();
            cfg.precomputed_val = jp.at("val").get<std::string>();
            cfg.precomputed_test = jp.at("test").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.space.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
    return config_from_json(doc);
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& stage_order() {
    static const std::vector<std::string> order{"pool",   "samples", "predictor",
                                                "global", "local",   "final"};
    return order;
}

struct RunManifest {
    std::string run_id;
    std::uint64_t master_seed = 0;
    std::uint64_t space_hash = 0;
    std::uint64_t dataset_fingerprint = 0;
    std::map<std::string, std::string> stages;  // stage name -> "pending" | "done"
    std::string tool_version{kToolVersion};
    int test_split_reads = 0;

    bool done(const std::string& stage) const {
        const auto it = stages.find(stage);
        return it != stages.end() && it->second == "done";
    }

    void invalidate_from(const std::string& stage) {
        bool hit = false;
        for (const auto& name : stage_order()) {
            if (name == stage) hit = true;
            if (hit) stages[name] = "pending";
        }
        if (!hit) throw ConfigError("unknown stage: " + stage);
    }

    nlohmann::json to_json() const {
        nlohmann::json doc;
        doc["format_version"] = 1;
        doc["run_id"] = run_id;
        doc["master_seed"] = master_seed;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(space_hash));
        doc["space_hash"] = buf;
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(dataset_fingerprint));
        doc["dataset_fingerprint"] = buf;
        doc["stages"] = stages;
        doc["tool_version"] = tool_version;
        doc["test_split_reads"] = test_split_reads;
        return doc;
    }

    static RunManifest from_json(const nlohmann::json& doc) {
        RunManifest m;
        m.run_id = doc.at("run_id").get<std::string>();
        m.master_seed = doc.at("master_seed").get<std::uint64_t>();
        m.space_hash = std::stoull(doc.at("space_hash").get<std::string>(), nullptr, 16);
        m.dataset_fingerprint =
            std::stoull(doc.at("dataset_fingerprint").get<std::string>(), nullptr, 16);
        m.stages = doc.at("stages").get<std::map<std::string, std::string>>();
        m.tool_version = doc.at("tool_version").get<std::string>();
        m.test_split_reads = doc.at("test_split_reads").get<int>();
        return m;
    }
};

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

class Pipeline {
public:
    Pipeline(RunConfig config, std::filesystem::path run_dir, int workers = 1)
        : config_(std::move(config)), dir_(std::move(run_dir)), workers_(workers) {
        std::filesystem::create_directories(dir_);
        IngestResult ingested = ingest(config_.dataset);
        data_ = std::move(ingested.data);
        if (!config_.precomputed_train.empty()) {
            precomputed_ = load_precomputed(config_.precomputed_train, config_.precomputed_val,
                                            config_.precomputed_test);
        }

        const std::uint64_t space_hash = config_.space.hash();
        char id[32];
        std::snprintf(id, sizeof id, "%016llx",
                      static_cast<unsigned long long>(
                          derive_seed(config_.master_seed, "run_id", space_hash,
                                      ingested.fingerprint)));
        if (std::filesystem::exists(manifest_path())) {
            manifest_ = load_manifest();
            if (manifest_.run_id != id)
                throw ConfigError(
                    "run directory belongs to a different (config, seed) combination");
            // The counter is derived state; rebuilding it from completed
            // stages heals interrupted-stage windows and forced reruns.
            manifest_.test_split_reads =
                (manifest_.done("global") ? 1 : 0) + (manifest_.done("local") ? 1 : 0) +
                (manifest_.done("final") && config_.baseline.enabled ? 1 : 0);
        } else {
            manifest_.run_id = id;
            manifest_.master_seed = config_.master_seed;
            manifest_.space_hash = space_hash;
            manifest_.dataset_fingerprint = ingested.fingerprint;
            for (const auto& stage : stage_order()) manifest_.stages[stage] = "pending";
            save_manifest();
        }

        trainer_.space = &config_.space;
        trainer_.data = &data_;
        trainer_.base_train = config_.train;
        trainer_.master_seed = config_.master_seed;
        if (precomputed_) trainer_.precomputed = &*precomputed_;
    }

    const RunManifest& manifest() const { return manifest_; }
    const DatasetTriple& data() const { return data_; }
    const std::filesystem::path& dir() const { return dir_; }
    std::size_t training_calls() const { return training_calls_.load(); }

    void run_all(const std::set<std::string>& force = {}) {
        if (!force.empty()) {
            for (const auto& stage : force) manifest_.invalidate_from(stage);
            manifest_.test_split_reads =
                (manifest_.done("global") ? 1 : 0) + (manifest_.done("local") ? 1 : 0);
            save_manifest();
        }
        stage_pool();
        stage_samples();
        stage_global();
        if (config_.local_enabled) {
            stage_local();
        } else {
            manifest_.stages["local"] = "skipped";
            save_manifest();
        }
        stage_final();
    }

    void stage_pool() {
        if (manifest_.done("pool")) return;
        const PoolResult pool = pool_from_sobol(config_.space, config_.selector.pool_count);
        if (pool.truncated)
            throw StageError("pool: sequence budget exhausted before enough distinct genes");
        nlohmann::json doc;
        doc["format_version"] = 1;
        doc["full_enumeration"] = pool.full_enumeration;
        nlohmann::json genes = nlohmann::json::array();
        for (const auto& g : pool.genes) genes.push_back(g.indices);
        doc["genes"] = genes;
        write_json(doc, "pool.json");
        mark_done("pool");
    }

    void stage_samples() {
        if (manifest_.done("samples") && manifest_.done("predictor")) return;
        const auto pool = load_pool();

        // Resume support: previously trained accuracies are reused, fresh
        // ones are appended to records.csv as they complete.
        std::map<std::vector<std::uint32_t>, double> stored;
        load_records_into(stored);
        std::ofstream append(records_path(), std::ios::app);
        if (stored.empty()) {
            for (std::size_t i = 0; i < config_.space.gene_length(); ++i) append << 'g' << i << ',';
            append << "accuracy,source_tag,seed\n";
            append.flush();
        }
        RecordStore store;
        store.lookup = [&](const ArchitectureGene& g) -> std::optional<double> {
            const auto it = stored.find(g.indices);
            if (it == stored.end()) return std::nullopt;
            return it->second;
        };
        store.append = [&](const AccuracyRecord& rec) {
            write_record_row(append, rec);
            append.flush();
        };

        SelectorConfig sel = config_.selector;
        sel.seed = derive_seed(config_.master_seed, "selector");
        sel.workers = workers_;
        auto counting_trainer = [&](const ArchitectureGene& g) {
            ++training_calls_;
            return trainer_(g);
        };
        const SelectionResult result =
            select_and_fit(config_.space, pool, counting_trainer, sel, &store);
        append.close();

        // Rewrite canonically so resumed and uninterrupted runs converge to
        // the same bytes.
        std::ofstream out(records_path(), std::ios::trunc);
        for (std::size_t i = 0; i < config_.space.gene_length(); ++i) out << 'g' << i << ',';
        out << "accuracy,source_tag,seed\n";
        for (const auto& rec : result.records) write_record_row(out, rec);
        out.close();
        mark_done("samples");

        write_json(model_to_json(result.model, result.records.size(), config_.space.hash()),
                   "predictor.json");
        mark_done("predictor");
    }

    void stage_global() {
        if (manifest_.done("global")) return;
        const BoostedTreeModel model = model_from_json(read_json("predictor.json"));

        EvolveConfig ev = config_.evolve;
        ev.seed = derive_seed(config_.master_seed, "evolve_stage");
        const SearchOutcome outcome = search(config_.space, model, ev);

        std::ofstream trace(dir_ / "evolve_trace.csv", std::ios::trunc);
        trace << "iteration,best_reward,mean_reward,best_gene\n";
        trace.precision(17);
        for (const auto& row : outcome.trace) {
            trace << row.iteration << ',' << row.best_reward << ',' << row.mean_reward << ',';
            for (std::size_t i = 0; i < row.best_gene.indices.size(); ++i)
                trace << (i ? ";" : "") << row.best_gene.indices[i];
            trace << '\n';
        }
        trace.close();

        ++training_calls_;
        const GeneTrainer::Outcome final = trainer_.finalize(
            outcome.best_gene, [&] { count_test_read("gs_finalize"); });

        write_json(network_to_json(final.net), "gs_network.json");
        nlohmann::json doc;
        doc["format_version"] = 1;
        doc["gene"] = outcome.best_gene.indices;
        doc["predicted_reward"] = outcome.best_reward;
        doc["val_accuracy"] = final.val_accuracy;
        doc["test_accuracy"] = final.test_accuracy;
        doc["active_params"] = final.active_params;
        doc["hidden_layers"] = final.config.hidden_layers;
        doc["neurons"] = final.config.neurons;
        doc["dr_method"] = dr_method_name(final.config.dr.method);
        doc["dr_method_id"] = final.config.dr_method_id;
        doc["dr_ratio"] = final.config.dr.ratio;
        doc["quant_bits"] = final.config.quant.bits;
        write_json(doc, "gs.json");
        mark_done("global");
    }

    void stage_local() {
        if (manifest_.done("local")) return;
        const auto gs = read_json("gs.json");
        ArchitectureGene gene;
        gene.indices = gs.at("gene").get<std::vector<std::uint32_t>>();
        const CandidateConfig decoded = decode(config_.space, gene);
        const GeneTrainer::ReducedData reduced = trainer_.reduce(decoded, /*with_test=*/true);

        SparseNetwork initial;
        if (config_.local.scheme == Scheme::A) {
            initial = build_network(
                {reduced.k, config_.scheme_a_seed_hidden,
                 static_cast<std::size_t>(data_.train.num_classes)},
                Connectivity::dense_adjacent, derive_seed(config_.master_seed, "ls_seed_net"));
            TrainConfig warm = config_.train;
            warm.seed = derive_seed(config_.master_seed, "ls_seed_train");
            ++training_calls_;
            initial = train(initial, reduced.train, reduced.val, warm).net;
        } else {
            initial = network_from_json(read_json("gs_network.json"));
        }

        LocalSearchConfig ls = config_.local;
        ls.quant = decoded.quant;
        ls.train = config_.train;
        ls.seed = derive_seed(config_.master_seed, "local_stage");
        const LocalSearchResult result = local_search(initial, reduced.train, reduced.val, ls);

        std::ofstream trace(dir_ / "ls_trace.csv", std::ios::trunc);
        trace << "iteration,op,active_connections,layer_sizes,val_accuracy\n";
        trace.precision(17);
        for (const auto& row : result.trace) {
            trace << row.iteration << ',' << row.op << ',' << row.active_connections << ',';
            for (std::size_t i = 0; i < row.layer_sizes.size(); ++i)
                trace << (i ? ";" : "") << row.layer_sizes[i];
            trace << ',' << row.val_accuracy << '\n';
        }
        trace.close();

        const SparseNetwork quantized = quantize(result.best_net, decoded.quant);
        count_test_read("ls_finalize");
        const double test_accuracy = evaluate(quantized, reduced.test);

        write_json(network_to_json(result.best_net), "ls_network.json");
        nlohmann::json doc;
        doc["format_version"] = 1;
        doc["gene"] = gene.indices;
        doc["val_accuracy"] = result.best_val_accuracy;
        doc["test_accuracy"] = test_accuracy;
        doc["active_params"] = result.best_net.active_weights();
        doc["layer_sizes"] = result.best_net.layer_sizes;
        doc["quant_bits"] = decoded.quant.bits;
        write_json(doc, "ls.json");
        mark_done("local");
    }

    void stage_final() {
        if (manifest_.done("final")) return;

        nlohmann::json baseline;
        if (config_.baseline.enabled) {
            std::vector<std::size_t> sizes{data_.train.dim()};
            for (int h : config_.baseline.hidden) sizes.push_back(static_cast<std::size_t>(h));
            sizes.push_back(static_cast<std::size_t>(data_.train.num_classes));
            SparseNetwork net =
                build_network(sizes, Connectivity::dense_adjacent,
                              derive_seed(config_.master_seed, "baseline_init"));
            TrainConfig cfg = config_.train;
            cfg.seed = derive_seed(config_.master_seed, "baseline_train");
            ++training_calls_;
            const TrainResult trained = train(net, data_.train, data_.val, cfg);
            if (trained.diverged) throw StageError("baseline training diverged");
            count_test_read("baseline");
            baseline["val_accuracy"] = trained.best_val_accuracy;
            baseline["test_accuracy"] = evaluate(trained.net, data_.test);
            baseline["active_params"] = trained.net.active_weights();
            baseline["hidden"] = config_.baseline.hidden;
            write_json(network_to_json(trained.net), "baseline_network.json");
        }

        const int expected_reads =
            1 + (manifest_.done("local") ? 1 : 0) + (config_.baseline.enabled ? 1 : 0);
        if (manifest_.test_split_reads != expected_reads)
            throw StageError("test split was read " +
                             std::to_string(manifest_.test_split_reads) + " times, expected " +
                             std::to_string(expected_reads));

        nlohmann::json report;
        report["format_version"] = 1;
        report["run_id"] = manifest_.run_id;
        report["master_seed"] = manifest_.master_seed;
        report["tool_version"] = manifest_.tool_version;
        report["dataset"] = {{"train_rows", data_.train.size()},
                             {"val_rows", data_.val.size()},
                             {"test_rows", data_.test.size()},
                             {"features", data_.train.dim()},
                             {"classes", data_.train.num_classes}};
        if (config_.baseline.enabled) report["baseline"] = baseline;
        report["gs"] = read_json("gs.json");
        if (manifest_.done("local")) report["gs_ls"] = read_json("ls.json");
        write_json(report, "report.json");

        // Plot-ready accuracy-versus-parameters curve: the headline rows plus
        // every local-search snapshot.
        std::ofstream curve(dir_ / "report.csv", std::ios::trunc);
        curve << "row,active_params,val_accuracy,test_accuracy\n";
        curve.precision(17);
        if (config_.baseline.enabled)
            curve << "baseline," << baseline["active_params"].get<std::size_t>() << ','
                  << baseline["val_accuracy"].get<double>() << ','
                  << baseline["test_accuracy"].get<double>() << '\n';
        const auto gs = report["gs"];
        curve << "gs," << gs["active_params"].get<std::size_t>() << ','
              << gs["val_accuracy"].get<double>() << ',' << gs["test_accuracy"].get<double>()
              << '\n';
        if (manifest_.done("local")) {
            std::ifstream trace(dir_ / "ls_trace.csv");
            std::string line;
            std::getline(trace, line);
            while (std::getline(trace, line)) {
                if (line.empty()) continue;
                std::stringstream ss(line);
                std::string iter, op, params, layers, acc;
                std::getline(ss, iter, ',');
                std::getline(ss, op, ',');
                std::getline(ss, params, ',');
                std::getline(ss, layers, ',');
                std::getline(ss, acc, ',');
                curve << "ls_iter_" << iter << ',' << params << ',' << acc << ",\n";
            }
            const auto ls = report["gs_ls"];
            curve << "gs_ls," << ls["active_params"].get<std::size_t>() << ','
                  << ls["val_accuracy"].get<double>() << ','
                  << ls["test_accuracy"].get<double>() << '\n';
        }
        curve.close();
        mark_done("final");
    }

    std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }
    std::filesystem::path records_path() const { return dir_ / "records.csv"; }

    nlohmann::json read_json(const char* name) const {
        std::ifstream in(dir_ / name);
        if (!in) throw StageError(std::string("missing artifact ") + name +
                                  " (stage not run yet?)");
        nlohmann::json doc;
        in >> doc;
        return doc;
    }

private:
    void write_json(const nlohmann::json& doc, const char* name) const {
        std::ofstream out(dir_ / name, std::ios::trunc);
        out << doc.dump(2) << '\n';
    }

    RunManifest load_manifest() const {
        std::ifstream in(manifest_path());
        nlohmann::json doc;
        in >> doc;
        return RunManifest::from_json(doc);
    }

    void save_manifest() const {
        std::ofstream out(manifest_path(), std::ios::trunc);
        out << manifest_.to_json().dump(2) << '\n';
    }

    void mark_done(const std::string& stage) {
        manifest_.stages[stage] = "done";
        save_manifest();
    }

    void count_test_read(const char*) {
        ++manifest_.test_split_reads;
        save_manifest();
    }

    std::vector<ArchitectureGene> load_pool() const {
        const auto doc = read_json("pool.json");
        std::vector<ArchitectureGene> pool;
        for (const auto& jg : doc.at("genes")) {
            ArchitectureGene g;
            g.indices = jg.get<std::vector<std::uint32_t>>();
            pool.push_back(std::move(g));
        }
        return pool;
    }

    void load_records_into(std::map<std::vector<std::uint32_t>, double>& stored) const {
        std::ifstream in(records_path());
        if (!in) return;
        std::string line;
        std::getline(in, line);  // header
        const std::size_t n = config_.space.gene_length();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::uint32_t> indices;
            std::stringstream ss(line);
            std::string cell;
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::getline(ss, cell, ',')) break;
                indices.push_back(static_cast<std::uint32_t>(std::stoul(cell)));
            }
            if (indices.size() != n || !std::getline(ss, cell, ',')) continue;
            stored[indices] = std::stod(cell);
        }
    }

    void write_record_row(std::ofstream& out, const AccuracyRecord& rec) const {
        out.precision(17);
        for (auto idx : rec.gene.indices) out << idx << ',';
        out << rec.accuracy << ',' << rec.source_tag << ','
            << trainer_.train_seed_for(rec.gene) << '\n';
    }

    RunConfig config_;
    std::filesystem::path dir_;
    int workers_ = 1;
    DatasetTriple data_;
    std::optional<DatasetTriple> precomputed_;
    GeneTrainer trainer_;
    RunManifest manifest_;
    std::atomic<std::size_t> training_calls_{0};
};

/// Human-readable run summary for the report subcommand.
inline std::string render_report(const nlohmann::json& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %12s %12s %10s %16s %6s\n", "row", "val_acc",
                  "test_acc", "params", "dr", "quant");
    out += line;
    auto emit = [&](const char* name, const nlohmann::json& row) {
        std::string dr = "-";
        if (row.contains("dr_method")) {
            char drbuf[64];
            std::snprintf(drbuf, sizeof drbuf, "%s/%.1f",
                          row["dr_method"].get<std::string>().c_str(),
                          row["dr_ratio"].get<double>());
            dr = drbuf;
        }
        std::snprintf(line, sizeof line, "%-10s %12.4f %12.4f %10zu %16s %6s\n", name,
                      row["val_accuracy"].get<double>(), row["test_accuracy"].get<double>(),
                      row["active_params"].get<std::size_t>(), dr.c_str(),
                      row.contains("quant_bits")
                          ? std::to_string(row["quant_bits"].get<int>()).c_str()
                          : "-");
        out += line;
    };
    if (report.contains("baseline")) emit("baseline", report["baseline"]);
    if (report.contains("gs")) emit("GS", report["gs"]);
    if (report.contains("gs_ls")) emit("GS+LS", report["gs_ls"]);
    return out;
}

}  // namespace nnsynth
