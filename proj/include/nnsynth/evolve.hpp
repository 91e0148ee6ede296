// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file evolve.hpp Predictor-guided genetic global search. Each iteration
/// breeds children by probabilistic single-coordinate mutation, pools them
/// with their parents, and keeps the highest-reward slice, so the best reward
/// never decreases.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "nnsynth/search_space.hpp"

namespace nnsynth {

struct EvolveConfig {
    std::size_t population = 100;
    std::size_t max_iterations = 200;
    double mutation_prob = 0.4;
    bool crossover_enabled = false;  // uniform crossover; off reproduces the plain loop
    std::uint64_t seed = 0;

    void validate() const {
        if (population < 1) throw std::invalid_argument("evolve: population must be >= 1");
        if (mutation_prob < 0.0 || mutation_prob > 1.0)
            throw std::invalid_argument("evolve: mutation_prob must be in [0, 1]");
    }
};

/// Resamples exactly one coordinate, chosen uniformly among coordinates whose
/// grid has at least two points, to a different grid index. When every
/// coordinate is a single-point grid the gene is returned unchanged.
inline ArchitectureGene mutate(const ArchitectureGene& gene, const SearchSpace& space,
                               Rng& rng) {
    space.require_valid(gene);
    std::vector<std::size_t> mutable_coords;
    for (std::size_t i = 0; i < space.gene_length(); ++i)
        if (space.params[i].grid_size() >= 2) mutable_coords.push_back(i);
    if (mutable_coords.empty()) return gene;

    ArchitectureGene child = gene;
    const std::size_t coord = mutable_coords[rng.index(mutable_coords.size())];
    const std::size_t grid = space.params[coord].grid_size();
    std::size_t pick = rng.index(grid - 1);
    if (pick >= child.indices[coord]) ++pick;  // skip the current index
    child.indices[coord] = static_cast<std::uint32_t>(pick);
    return child;
}

inline ArchitectureGene random_gene(const SearchSpace& space, Rng& rng) {
    ArchitectureGene gene;
    gene.indices.reserve(space.gene_length());
    for (const auto& p : space.params)
        gene.indices.push_back(static_cast<std::uint32_t>(rng.index(p.grid_size())));
    return gene;
}

struct EvolveIterationStat {
    std::size_t iteration = 0;
    double best_reward = 0.0;
    double mean_reward = 0.0;
    ArchitectureGene best_gene;
};

struct SearchOutcome {
    ArchitectureGene best_gene;
    double best_reward = 0.0;
    std::vector<EvolveIterationStat> trace;
};

/// The global search loop. `model` only needs predict(gene) -> double.
/// Sorting is stable with ties resolved by insertion order (children first,
/// then parents), which pins the outcome for a given seed.
template <typename Model>
SearchOutcome search(const SearchSpace& space, const Model& model, const EvolveConfig& config) {
    config.validate();
    space.validate();
    Rng rng(derive_seed(config.seed, "evolve"));

    struct Individual {
        ArchitectureGene gene;
        double reward;
    };

    std::vector<Individual> parents;
    parents.reserve(config.population);
    for (std::size_t i = 0; i < config.population; ++i) {
        ArchitectureGene g = random_gene(space, rng);
        const double r = model.predict(g);
        parents.push_back({std::move(g), r});
    }

    SearchOutcome outcome;
    auto note_best = [&](std::size_t iteration, const std::vector<Individual>& group) {
        const Individual* best = &group.front();
        double mean = 0.0;
        for (const auto& ind : group) {
            mean += ind.reward;
            if (ind.reward > best->reward) best = &ind;
        }
        mean /= static_cast<double>(group.size());
        if (outcome.trace.empty() || best->reward > outcome.best_reward) {
            outcome.best_gene = best->gene;
            outcome.best_reward = best->reward;
        }
        outcome.trace.push_back({iteration, best->reward, mean, best->gene});
    };
    note_best(0, parents);

    for (std::size_t iteration = 1; iteration <= config.max_iterations; ++iteration) {
        std::vector<Individual> children;
        children.reserve(parents.size() * 2);
        for (const auto& parent : parents) {
            Individual child = parent;
            if (config.crossover_enabled && parents.size() > 1) {
                const auto& mate = parents[rng.index(parents.size())];
                for (std::size_t c = 0; c < child.gene.indices.size(); ++c)
                    if (rng.uniform() < 0.5) child.gene.indices[c] = mate.gene.indices[c];
            }
            if (rng.uniform() < config.mutation_prob)
                child.gene = mutate(child.gene, space, rng);
            child.reward = model.predict(child.gene);
            children.push_back(std::move(child));
        }
        for (const auto& parent : parents) children.push_back(parent);
        std::stable_sort(children.begin(), children.end(),
                         [](const Individual& a, const Individual& b) {
                             return a.reward > b.reward;
                         });
        children.resize(std::min(config.population, children.size()));
        parents = std::move(children);
        note_best(iteration, parents);
    }
    return outcome;
}

}  // namespace nnsynth
