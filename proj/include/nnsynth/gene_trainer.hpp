// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file gene_trainer.hpp Turns an architecture gene into a fitness value:
/// decode, reduce the feature space, build and train the network, quantize
/// for inference, and score on the validation split. All randomness derives
/// from the master seed and the gene content, so a gene's fitness does not
/// depend on when or where it is evaluated.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "nnsynth/dimreduce.hpp"
#include "nnsynth/search_space.hpp"
#include "nnsynth/train.hpp"

namespace nnsynth {

class GeneTrainer {
public:
    const SearchSpace* space = nullptr;
    const DatasetTriple* data = nullptr;  // normalized splits
    TrainConfig base_train;
    std::uint64_t master_seed = 0;
    /// Externally reduced splits; required by dimensionality-reduction
    /// methods 6-11, which have no built-in implementation.
    const DatasetTriple* precomputed = nullptr;

    struct ReducedData {
        Dataset train, val, test;
        std::size_t k = 0;
    };

    /// Applies the gene's dimensionality reduction. Transforms are fit on
    /// the training split only and reused verbatim on validation and test.
    ReducedData reduce(const CandidateConfig& cfg, bool with_test) const {
        ReducedData out;
        const std::size_t d = data->train.dim();
        switch (cfg.dr.method) {
            case DrMethod::none:
                out.train = data->train;
                out.val = data->val;
                if (with_test) out.test = data->test;
                out.k = d;
                return out;
            case DrMethod::rp_gauss_scaled:
            case DrMethod::rp_gauss_unit:
            case DrMethod::rp_sign:
            case DrMethod::rp_sparse: {
                out.k = cfg.dr.reduced_dim(d);
                const Matrix phi =
                    rp_matrix(d, out.k, cfg.dr.method, derive_seed(master_seed, "dr"));
                out.train = project(data->train, phi);
                out.val = project(data->val, phi);
                if (with_test) out.test = project(data->test, phi);
                return out;
            }
            case DrMethod::pca: {
                out.k = cfg.dr.reduced_dim(d);
                const PcaModel model = pca_fit(data->train, out.k);
                out.train = pca_transform(model, data->train);
                out.val = pca_transform(model, data->val);
                if (with_test) out.test = pca_transform(model, data->test);
                return out;
            }
            case DrMethod::precomputed: {
                if (!precomputed)
                    throw std::runtime_error(
                        "dr method " + std::to_string(cfg.dr_method_id) +
                        " requires a precomputed reduced dataset and none was supplied");
                out.train = precomputed->train;
                out.val = precomputed->val;
                if (with_test) out.test = precomputed->test;
                out.k = precomputed->train.dim();
                return out;
            }
        }
        throw std::logic_error("reduce: unhandled method");
    }

    std::vector<std::size_t> layer_sizes_for(const CandidateConfig& cfg, std::size_t k) const {
        std::vector<std::size_t> sizes{k};
        for (int n : cfg.neurons) sizes.push_back(static_cast<std::size_t>(n));
        sizes.push_back(static_cast<std::size_t>(data->train.num_classes));
        return sizes;
    }

    std::uint64_t train_seed_for(const ArchitectureGene& gene) const {
        return derive_seed(master_seed, "train", gene.hash());
    }

    struct Outcome {
        SparseNetwork net;            // full-precision best-epoch snapshot
        SparseNetwork net_quantized;  // inference-quantized copy
        CandidateConfig config;
        double val_accuracy = 0.0;
        double test_accuracy = -1.0;  // negative when the test split was not touched
        std::size_t active_params = 0;
        bool diverged = false;
    };

    Outcome run(const ArchitectureGene& gene, bool with_test,
                const std::function<void()>& on_test_read = {}) const {
        space->require_valid(gene);
        Outcome out;
        out.config = decode(*space, gene);
        const ReducedData reduced = reduce(out.config, with_test);

        SparseNetwork net =
            build_network(layer_sizes_for(out.config, reduced.k),
                          Connectivity::dense_adjacent,
                          derive_seed(master_seed, "init", gene.hash()));
        TrainConfig cfg = base_train;
        cfg.seed = train_seed_for(gene);
        TrainResult trained = train(net, reduced.train, reduced.val, cfg);
        out.diverged = trained.diverged;
        out.net = std::move(trained.net);
        out.net_quantized = quantize(out.net, out.config.quant);
        out.active_params = out.net.active_weights();
        out.val_accuracy = out.diverged ? 0.0 : evaluate(out.net_quantized, reduced.val);
        if (with_test && !out.diverged) {
            if (on_test_read) on_test_read();
            out.test_accuracy = evaluate(out.net_quantized, reduced.test);
        }
        return out;
    }

    /// Fitness signal for the selector and search: validation accuracy under
    /// the gene's inference quantization; a diverging candidate scores 0.
    double operator()(const ArchitectureGene& gene) const {
        return run(gene, /*with_test=*/false).val_accuracy;
    }

    /// Full evaluation of a search winner, including the single test-split
    /// read. Divergence here is an error carrying the gene, not a score.
    Outcome finalize(const ArchitectureGene& gene,
                     const std::function<void()>& on_test_read = {}) const {
        Outcome out = run(gene, /*with_test=*/true, on_test_read);
        if (out.diverged) {
            std::string msg = "training diverged for gene [";
            for (std::size_t i = 0; i < gene.indices.size(); ++i)
                msg += (i ? "," : "") + std::to_string(gene.indices[i]);
            throw std::runtime_error(msg + "]");
        }
        return out;
    }
};

}  // namespace nnsynth
