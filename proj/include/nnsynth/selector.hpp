// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file selector.hpp Iterative sample selection and accuracy-predictor
/// training over the Sobol pool: an initial random batch, then, per
/// iteration, the highest-predicted remaining pool members are trained and
/// the predictor is refit on everything accumulated.

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nnsynth/predictor.hpp"
#include "nnsynth/sobol.hpp"

namespace nnsynth {

struct SelectorConfig {
    std::size_t pool_count = 2048;
    std::size_t iter_count = 100;    // candidates trained per batch
    std::size_t max_iterations = 3;  // batches after the initial random one
    std::uint64_t seed = 0;
    int workers = 1;
    int predictor_max_depth = 5;
    int predictor_max_stages = 500;

    void validate() const {
        if (pool_count < 1 || iter_count < 1)
            throw std::invalid_argument("selector: counts must be positive");
        if (iter_count * (max_iterations + 1) > pool_count)
            throw std::invalid_argument(
                "selector: iter_count * (max_iterations + 1) must not exceed pool_count");
    }
};

/// Persistence hooks for resumable runs. `lookup` answers with a previously
/// trained accuracy so the gene is not retrained; `append` sees every new
/// record in batch order.
struct RecordStore {
    std::function<std::optional<double>(const ArchitectureGene&)> lookup;
    std::function<void(const AccuracyRecord&)> append;
};

struct SelectionResult {
    BoostedTreeModel model;
    std::vector<AccuracyRecord> records;
};

/// Runs the iterative selection loop. `trainer` maps a gene to its
/// validation accuracy and must be safe to call from parallel workers; a
/// throwing trainer records accuracy 0.0 for that gene and the loop
/// continues. With a fixed seed the outcome is bit-identical for any worker
/// count: batch membership is decided before training, per-gene work is
/// independent, and results merge in pool order.
template <typename Trainer>
SelectionResult select_and_fit(const SearchSpace& space,
                               const std::vector<ArchitectureGene>& pool, Trainer&& trainer,
                               const SelectorConfig& config,
                               const RecordStore* store = nullptr) {
    config.validate();
    {
        std::set<std::vector<std::uint32_t>> distinct;
        for (const auto& g : pool) {
            space.require_valid(g);
            if (!distinct.insert(g.indices).second)
                throw std::invalid_argument("selector: pool contains duplicate genes");
        }
    }
    if (pool.size() < config.iter_count)
        throw std::invalid_argument("selector: pool smaller than one batch");

    SelectionResult result;
    std::vector<bool> used(pool.size(), false);

    auto train_batch = [&](const std::vector<std::size_t>& batch, const std::string& tag) {
        std::vector<double> acc(batch.size(), 0.0);
        std::vector<bool> cached(batch.size(), false);
        if (store && store->lookup)
            for (std::size_t i = 0; i < batch.size(); ++i)
                if (auto hit = store->lookup(pool[batch[i]])) {
                    acc[i] = *hit;
                    cached[i] = true;
                }
        parallel_for(batch.size(), config.workers, [&](std::size_t i) {
            if (cached[i]) return;
            try {
                acc[i] = trainer(pool[batch[i]]);
            } catch (const std::exception&) {
                acc[i] = 0.0;  // a failing candidate scores badly, it does not stop the run
            }
        });
        for (std::size_t i = 0; i < batch.size(); ++i) {
            AccuracyRecord rec{pool[batch[i]], acc[i], tag};
            used[batch[i]] = true;
            if (store && store->append && !cached[i]) store->append(rec);
            result.records.push_back(std::move(rec));
        }
    };

    // Initial batch: uniform random draw without replacement from the pool.
    {
        Rng rng(derive_seed(config.seed, "selector_init"));
        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.index(i)]);
        std::vector<std::size_t> batch(order.begin(),
                                       order.begin() + static_cast<std::ptrdiff_t>(config.iter_count));
        std::sort(batch.begin(), batch.end());
        train_batch(batch, "initial_random");
    }
    result.model = fit_boosted(result.records, config.predictor_max_depth,
                               config.predictor_max_stages,
                               derive_seed(config.seed, "selector_fit", 0));

    for (std::size_t iteration = 1; iteration <= config.max_iterations; ++iteration) {
        // Score the remaining pool and take the top iter_count, ties by
        // lower pool index.
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t p = 0; p < pool.size(); ++p)
            if (!used[p]) scored.emplace_back(result.model.predict(pool[p]), p);
        if (scored.empty()) break;
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        const std::size_t take = std::min<std::size_t>(config.iter_count, scored.size());
        std::vector<std::size_t> batch;
        batch.reserve(take);
        for (std::size_t i = 0; i < take; ++i) batch.push_back(scored[i].second);
        std::sort(batch.begin(), batch.end());
        train_batch(batch, "iteration_" + std::to_string(iteration));
        result.model = fit_boosted(result.records, config.predictor_max_depth,
                                   config.predictor_max_stages,
                                   derive_seed(config.seed, "selector_fit", iteration));
    }
    return result;
}

}  // namespace nnsynth
