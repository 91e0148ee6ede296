// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file synthetic.hpp Synthetic response surfaces standing in for trained
/// architecture accuracy in predictor and search tests, plus the exhaustive
/// search oracle for small spaces.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nnsynth/search_space.hpp"

namespace nnsynth {

/// Smooth, mildly interacting pseudo-accuracy surface over a search space.
/// Pure in (gene, seed): the same gene and seed always produce the same
/// noisy sample.
struct SyntheticSurface {
    std::string generator_id = "ridge_bumps";
    double noise_sigma = 0.015;

    static std::vector<double> normalized(const SearchSpace& space,
                                          const ArchitectureGene& gene) {
        std::vector<double> c(space.gene_length());
        for (std::size_t i = 0; i < space.gene_length(); ++i) {
            const std::size_t grid = space.params[i].grid_size();
            c[i] = grid > 1 ? static_cast<double>(gene.indices[i]) /
                                  static_cast<double>(grid - 1)
                            : 0.5;
        }
        return c;
    }

    /// Noiseless response in [0, 1].
    double mean(const SearchSpace& space, const ArchitectureGene& gene) const {
        const auto c = normalized(space, gene);
        const std::size_t n = c.size();
        const double a = c[0];
        const double b = c[n / 2];
        const double d = c[1 % n];
        const double e = c[n - 1];
        double f = 0.42;
        f += 0.34 * std::exp(-3.0 * ((a - 0.65) * (a - 0.65) + (b - 0.35) * (b - 0.35)));
        f += 0.14 * d * (1.0 - e);
        f += 0.05 * std::sin(6.283185307179586 * b) * (0.5 + 0.5 * a);
        return std::clamp(f, 0.0, 1.0);
    }

    /// Noisy sample of the surface.
    double evaluate(const SearchSpace& space, const ArchitectureGene& gene,
                    std::uint64_t seed) const {
        Rng rng(derive_seed(seed, "surface", gene.hash()));
        return std::clamp(mean(space, gene) + rng.normal(0.0, noise_sigma), 0.0, 1.0);
    }
};

/// Separable peak with a small interaction factor; the unique maximum sits at
/// the target gene, which makes it a convenient analytic objective for search
/// tests.
struct PeakObjective {
    std::vector<std::uint32_t> target;

    double operator()(const SearchSpace& space, const ArchitectureGene& gene) const {
        double quad = 0.0;
        for (std::size_t i = 0; i < gene.indices.size(); ++i) {
            const std::size_t grid = space.params[i].grid_size();
            if (grid < 2) continue;
            const double c = static_cast<double>(gene.indices[i]) / static_cast<double>(grid - 1);
            const double t = static_cast<double>(target[i]) / static_cast<double>(grid - 1);
            quad += (c - t) * (c - t);
        }
        double f = std::exp(-2.0 * quad);
        if (gene.indices.size() >= 2) {
            const auto c0 = static_cast<double>(gene.indices[0]);
            const auto t0 = static_cast<double>(target[0]);
            const std::size_t g0 = space.params[0].grid_size();
            if (g0 > 1)
                f *= 1.0 + 0.1 * std::cos(3.141592653589793 * (c0 - t0) /
                                          static_cast<double>(g0 - 1));
        }
        return f;
    }
};

struct ExhaustiveOptimum {
    ArchitectureGene gene;
    double value = 0.0;
};

/// Exact argmax by enumeration. Ties resolve to the first gene in mixed-radix
/// enumeration order. Spaces larger than `limit` genes are an error.
inline ExhaustiveOptimum oracle_exhaustive(
    const SearchSpace& space,
    const std::function<double(const ArchitectureGene&)>& objective,
    std::uint64_t limit = 4096) {
    space.validate();
    const std::uint64_t total = space.total_grid_size();
    if (total == 0) throw std::invalid_argument("oracle_exhaustive: empty space");
    if (total > limit) throw std::invalid_argument("oracle_exhaustive: space too large");

    ExhaustiveOptimum best;
    ArchitectureGene gene;
    gene.indices.assign(space.gene_length(), 0);
    bool first = true;
    for (;;) {
        const double v = objective(gene);
        if (first || v > best.value) {
            best.gene = gene;
            best.value = v;
            first = false;
        }
        std::size_t pos = space.gene_length();
        bool done = true;
        while (pos > 0) {
            --pos;
            if (++gene.indices[pos] < space.params[pos].grid_size()) {
                done = false;
                break;
            }
            gene.indices[pos] = 0;
        }
        if (done) break;
    }
    return best;
}

}  // namespace nnsynth
