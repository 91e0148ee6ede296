// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file growprune.hpp Grow-and-prune local search over a trained network:
/// connection growth steered by the loss gradient, neuron growth by
/// duplication or random wiring, and magnitude-based connection pruning with
/// transitive removal of isolated neurons. Scheme A grows from a small seed,
/// Scheme B shrinks from a large net, Scheme C is Scheme B restricted to
/// adjacent-layer (MLP) connectivity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nnsynth/dimreduce.hpp"
#include "nnsynth/train.hpp"

namespace nnsynth {

enum class Scheme { A, B, C };
enum class LocalOp { grow_conn, grow_neuron, prune_conn };
enum class PruneMode { small_weight, large_weight };
enum class NeuronGrowthMode { duplicate, random };

inline const char* local_op_name(LocalOp op) {
    switch (op) {
        case LocalOp::grow_conn: return "grow_conn";
        case LocalOp::grow_neuron: return "grow_neuron";
        case LocalOp::prune_conn: return "prune_conn";
    }
    return "?";
}

namespace detail {

inline bool pair_allowed(Scheme scheme, std::size_t i, std::size_t j) {
    return scheme == Scheme::C ? j == i + 1 : true;
}

}  // namespace detail

struct GrowthReport {
    std::size_t activated = 0;
    bool exhausted = false;  // no inactive connection was available
};

/// Activates the `count` inactive connections with the largest loss-gradient
/// magnitude on the growth batch, restricted to layer pairs the scheme
/// allows. New weights start at init_weight * sign(-gradient).
inline GrowthReport connection_growth(SparseNetwork& net, const Matrix& batch,
                                      const std::vector<int>& labels, std::size_t count,
                                      Scheme scheme, double init_weight) {
    if (count < 1) throw std::invalid_argument("connection_growth: count must be >= 1");
    const Gradients g = gradient(net, batch, labels, GradScope::all_pairs);

    struct Candidate {
        double magnitude;
        std::size_t block, offset;
        double grad;
    };
    std::vector<Candidate> candidates;
    for (std::size_t idx = 0; idx < net.blocks.size(); ++idx) {
        const auto pair = net.pair_of(idx);
        if (!detail::pair_allowed(scheme, pair.from, pair.to)) continue;
        if (g.blocks[idx].empty()) continue;
        const WeightBlock& b = net.blocks[idx];
        const std::size_t total = net.layer_sizes[pair.from] * net.layer_sizes[pair.to];
        for (std::size_t x = 0; x < total; ++x) {
            const bool active = b.allocated() && b.mask[x];
            if (active) continue;
            candidates.push_back({std::abs(g.blocks[idx].data[x]), idx, x,
                                  g.blocks[idx].data[x]});
        }
    }
    GrowthReport report;
    if (candidates.empty()) {
        report.exhausted = true;
        return report;
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
        if (a.block != b.block) return a.block < b.block;
        return a.offset < b.offset;
    });
    const std::size_t take = std::min(count, candidates.size());
    for (std::size_t i = 0; i < take; ++i) {
        const auto& c = candidates[i];
        const auto pair = net.pair_of(c.block);
        net.allocate_block(pair.from, pair.to);
        WeightBlock& b = net.blocks[c.block];
        b.mask[c.offset] = 1;
        b.w.data[c.offset] = c.grad > 0.0 ? -init_weight : (c.grad < 0.0 ? init_weight : 0.0);
    }
    report.activated = take;
    return report;
}

/// Adds one neuron to a hidden layer. Duplicate mode clones a uniformly
/// chosen neuron's active connections and bias, each perturbed by Gaussian
/// noise with sigma = noise_scale * |value|. Random mode wires the new neuron
/// at each touching block's current connection density with fresh fan-in
/// scaled initialization, forcing at least one inbound and one outbound
/// connection.
inline void neuron_growth(SparseNetwork& net, std::size_t layer, NeuronGrowthMode mode,
                          Rng& rng, double noise_scale = 0.01) {
    if (layer == 0 || layer + 1 >= net.layer_count())
        throw std::invalid_argument("neuron_growth: hidden layers only");
    const std::size_t old_size = net.layer_sizes[layer];

    if (mode == NeuronGrowthMode::duplicate) {
        if (old_size == 0) throw std::invalid_argument("neuron_growth: layer is empty");
        const std::size_t src = rng.index(old_size);
        const double src_bias = net.biases[layer - 1][src];
        net.append_neuron(layer);
        const std::size_t dst = old_size;
        for (std::size_t i = 0; i < layer; ++i) {
            WeightBlock& b = net.block(i, layer);
            if (!b.allocated()) continue;
            for (std::size_t r = 0; r < b.w.rows; ++r)
                if (b.mask[r * b.w.cols + src]) {
                    const double w = b.w(r, src);
                    b.mask[r * b.w.cols + dst] = 1;
                    b.w(r, dst) = w + rng.normal(0.0, noise_scale * std::abs(w));
                }
        }
        for (std::size_t j = layer + 1; j < net.layer_count(); ++j) {
            WeightBlock& b = net.block(layer, j);
            if (!b.allocated()) continue;
            for (std::size_t c = 0; c < b.w.cols; ++c)
                if (b.mask[src * b.w.cols + c]) {
                    const double w = b.w(src, c);
                    b.mask[dst * b.w.cols + c] = 1;
                    b.w(dst, c) = w + rng.normal(0.0, noise_scale * std::abs(w));
                }
        }
        net.biases[layer - 1][dst] =
            src_bias + rng.normal(0.0, noise_scale * std::abs(src_bias));
        return;
    }

    // Random mode.
    net.append_neuron(layer);
    const std::size_t dst = old_size;
    std::size_t fan_in = 0;
    for (std::size_t i = 0; i < layer; ++i)
        if (net.block(i, layer).allocated()) fan_in += net.layer_sizes[i];
    const double a = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));

    auto block_density = [&](const WeightBlock& b) {
        if (!b.allocated() || b.w.data.empty()) return 0.0;
        return static_cast<double>(b.active_count()) / static_cast<double>(b.w.data.size());
    };

    std::size_t in_added = 0, out_added = 0;
    for (std::size_t i = 0; i < layer; ++i) {
        WeightBlock& b = net.block(i, layer);
        if (!b.allocated()) continue;
        const double density = block_density(b);
        for (std::size_t r = 0; r < b.w.rows; ++r)
            if (rng.uniform() < density) {
                b.mask[r * b.w.cols + dst] = 1;
                b.w(r, dst) = rng.uniform(-a, a);
                ++in_added;
            }
    }
    for (std::size_t j = layer + 1; j < net.layer_count(); ++j) {
        WeightBlock& b = net.block(layer, j);
        if (!b.allocated()) continue;
        const double density = block_density(b);
        for (std::size_t c = 0; c < b.w.cols; ++c)
            if (rng.uniform() < density) {
                b.mask[dst * b.w.cols + c] = 1;
                b.w(dst, c) = rng.uniform(-a, a);
                ++out_added;
            }
    }
    if (in_added == 0) {
        WeightBlock& b = net.block(layer - 1, layer);
        if (b.allocated() && b.w.rows > 0) {
            const std::size_t r = rng.index(b.w.rows);
            b.mask[r * b.w.cols + dst] = 1;
            b.w(r, dst) = rng.uniform(-a, a);
        }
    }
    if (out_added == 0) {
        WeightBlock& b = net.block(layer, layer + 1);
        if (b.allocated() && b.w.cols > 0) {
            const std::size_t c = rng.index(b.w.cols);
            b.mask[dst * b.w.cols + c] = 1;
            b.w(dst, c) = rng.uniform(-a, a);
        }
    }
}

struct PruneReport {
    std::size_t removed_ranked = 0;    // connections cut by the magnitude rank
    std::size_t removed_cascade = 0;   // connections lost to isolated-neuron removal
    std::size_t removed_neurons = 0;
    bool aborted = false;              // pruning would have disconnected the network
};

/// Deactivates ceil(fraction * active) connections with the smallest
/// (small_weight) or largest (large_weight) |w|, then transitively removes
/// hidden neurons left with zero in-degree or zero out-degree. If the result
/// has no input-to-output path the network is left unchanged.
inline PruneReport connection_pruning(SparseNetwork& net, double fraction, PruneMode mode) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw std::invalid_argument("connection_pruning: fraction must be in (0, 1)");
    const std::size_t active = net.active_weights();
    PruneReport report;
    if (active == 0) {
        report.aborted = true;
        return report;
    }

    SparseNetwork work = net;
    struct Entry {
        double magnitude;
        std::size_t block, offset;
    };
    std::vector<Entry> entries;
    entries.reserve(active);
    for (std::size_t idx = 0; idx < work.blocks.size(); ++idx) {
        const WeightBlock& b = work.blocks[idx];
        if (!b.allocated()) continue;
        for (std::size_t x = 0; x < b.w.data.size(); ++x)
            if (b.mask[x]) entries.push_back({std::abs(b.w.data[x]), idx, x});
    }
    const bool ascending = mode == PruneMode::small_weight;
    std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
        if (a.magnitude != b.magnitude)
            return ascending ? a.magnitude < b.magnitude : a.magnitude > b.magnitude;
        if (a.block != b.block) return a.block < b.block;
        return a.offset < b.offset;
    });
    const auto cut = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(active)));
    for (std::size_t i = 0; i < cut && i < entries.size(); ++i) {
        WeightBlock& b = work.blocks[entries[i].block];
        b.mask[entries[i].offset] = 0;
        b.w.data[entries[i].offset] = 0.0;
    }
    report.removed_ranked = std::min(cut, entries.size());

    // Transitively remove hidden neurons without inputs or without outputs.
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t layer = 1; layer + 1 < work.layer_count() && !changed; ++layer) {
            for (std::size_t neuron = 0; neuron < work.layer_sizes[layer]; ++neuron) {
                std::size_t in_deg = 0, out_deg = 0;
                for (std::size_t i = 0; i < layer; ++i) {
                    const WeightBlock& b = work.block(i, layer);
                    if (!b.allocated()) continue;
                    for (std::size_t r = 0; r < b.w.rows; ++r)
                        in_deg += b.mask[r * b.w.cols + neuron];
                }
                for (std::size_t j = layer + 1; j < work.layer_count(); ++j) {
                    const WeightBlock& b = work.block(layer, j);
                    if (!b.allocated()) continue;
                    for (std::size_t c = 0; c < b.w.cols; ++c)
                        out_deg += b.mask[neuron * b.w.cols + c];
                }
                if (in_deg == 0 || out_deg == 0) {
                    report.removed_cascade += in_deg + out_deg;
                    ++report.removed_neurons;
                    work.remove_neuron(layer, neuron);
                    changed = true;
                    break;
                }
            }
        }
    }

    if (!work.has_input_output_path()) {
        report.aborted = true;
        report.removed_ranked = 0;
        report.removed_cascade = 0;
        report.removed_neurons = 0;
        return report;
    }
    net = std::move(work);
    return report;
}

struct LocalSearchConfig {
    Scheme scheme = Scheme::B;
    int max_iterations = 10;
    std::vector<LocalOp> op_schedule;           // empty selects the scheme default
    double grow_conn_count = 0.05;              // <= 1: fraction of inactive; > 1: absolute
    double prune_fraction = 0.3;
    double prune_decay = 0.7;                   // multiplies prune_fraction each schedule cycle
    PruneMode prune_mode = PruneMode::small_weight;
    NeuronGrowthMode neuron_growth_mode = NeuronGrowthMode::duplicate;
    int epochs_per_iteration = 15;
    QuantSpec quant{32};                        // inference quantization used for evaluation
    TrainConfig train;
    std::uint64_t seed = 0;

    std::vector<LocalOp> schedule() const {
        if (!op_schedule.empty()) return op_schedule;
        if (scheme == Scheme::A)
            return {LocalOp::grow_conn, LocalOp::grow_neuron, LocalOp::prune_conn};
        return {LocalOp::grow_conn, LocalOp::prune_conn};
    }

    void validate() const {
        if (max_iterations < 1)
            throw std::invalid_argument("local search: max_iterations must be >= 1");
        if (prune_fraction <= 0.0 || prune_fraction >= 1.0)
            throw std::invalid_argument("local search: prune_fraction must be in (0, 1)");
        if (grow_conn_count <= 0.0)
            throw std::invalid_argument("local search: grow_conn_count must be positive");
        quant.validate();
    }
};

struct LocalSearchTraceRow {
    int iteration = 0;
    std::string op;
    std::size_t active_connections = 0;
    std::vector<std::size_t> layer_sizes;
    double val_accuracy = 0.0;
};

struct LocalSearchResult {
    SparseNetwork best_net;        // full-precision weights of the best snapshot
    double best_val_accuracy = 0.0;
    std::vector<LocalSearchTraceRow> trace;
};

namespace detail {

inline std::size_t inactive_in_scheme(const SparseNetwork& net, Scheme scheme) {
    std::size_t inactive = 0;
    for (std::size_t idx = 0; idx < net.blocks.size(); ++idx) {
        const auto pair = net.pair_of(idx);
        if (!pair_allowed(scheme, pair.from, pair.to)) continue;
        const std::size_t total = net.layer_sizes[pair.from] * net.layer_sizes[pair.to];
        inactive += total - net.blocks[idx].active_count();
    }
    return inactive;
}

}  // namespace detail

/// Algorithmic core of local search: apply the next scheduled
/// architecture-changing operation, fine-tune the weights for a few epochs,
/// measure validation accuracy under the configured inference quantization,
/// and keep the best snapshot seen. Equal accuracies prefer the smaller
/// network. Stops early when a full schedule cycle of operations was a no-op.
inline LocalSearchResult local_search(const SparseNetwork& initial, const Dataset& train_ds,
                                      const Dataset& val_ds, const LocalSearchConfig& config) {
    config.validate();
    const auto schedule = config.schedule();
    Rng rng(derive_seed(config.seed, "local_search"));

    SparseNetwork current = initial;
    LocalSearchResult result;

    auto quantized_accuracy = [&](const SparseNetwork& net) {
        return evaluate(quantize(net, config.quant), val_ds);
    };
    auto consider = [&](const SparseNetwork& net, double acc) {
        const bool better =
            result.trace.empty() || acc > result.best_val_accuracy ||
            (acc == result.best_val_accuracy &&
             net.active_weights() < result.best_net.active_weights());
        if (better) {
            result.best_net = net;
            result.best_val_accuracy = acc;
        }
    };

    {
        const double acc = quantized_accuracy(current);
        consider(current, acc);
        result.trace.push_back(
            {0, "initial", current.active_weights(), current.layer_sizes, acc});
    }

    double prune_fraction = config.prune_fraction;
    std::size_t consecutive_noops = 0;

    for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
        const std::size_t slot = static_cast<std::size_t>(iteration - 1) % schedule.size();
        if (iteration > 1 && slot == 0) prune_fraction *= config.prune_decay;
        const LocalOp op = schedule[slot];
        bool noop = false;

        switch (op) {
            case LocalOp::grow_conn: {
                const std::size_t inactive = detail::inactive_in_scheme(current, config.scheme);
                if (inactive == 0) {
                    noop = true;
                    break;
                }
                std::size_t count;
                if (config.grow_conn_count <= 1.0)
                    count = static_cast<std::size_t>(
                        std::ceil(config.grow_conn_count * static_cast<double>(inactive)));
                else
                    count = static_cast<std::size_t>(config.grow_conn_count);
                const auto report =
                    connection_growth(current, train_ds.features, train_ds.labels, count,
                                      config.scheme, config.train.learning_rate);
                noop = report.exhausted;
                break;
            }
            case LocalOp::grow_neuron: {
                const std::size_t hidden = current.layer_count() - 2;
                if (hidden == 0) {
                    noop = true;
                    break;
                }
                std::vector<std::size_t> growable;
                for (std::size_t l = 1; l + 1 < current.layer_count(); ++l)
                    if (current.layer_sizes[l] > 0) growable.push_back(l);
                if (growable.empty()) {
                    noop = true;
                    break;
                }
                const std::size_t layer = growable[rng.index(growable.size())];
                neuron_growth(current, layer, config.neuron_growth_mode, rng);
                break;
            }
            case LocalOp::prune_conn: {
                const auto report = connection_pruning(current, prune_fraction,
                                                       config.prune_mode);
                noop = report.aborted;
                break;
            }
        }

        if (!current.mask_consistent())
            throw std::logic_error("local_search: mask/weight consistency violated");

        consecutive_noops = noop ? consecutive_noops + 1 : 0;

        TrainConfig tune = config.train;
        tune.epochs = config.epochs_per_iteration;
        tune.seed = derive_seed(config.seed, "ls_train", static_cast<std::uint64_t>(iteration));
        TrainResult trained = train(current, train_ds, val_ds, tune);
        current = trained.net;
        const double acc = trained.diverged ? 0.0 : quantized_accuracy(current);
        consider(current, acc);
        result.trace.push_back({iteration, local_op_name(op), current.active_weights(),
                                current.layer_sizes, acc});

        if (consecutive_noops >= schedule.size()) break;
    }
    return result;
}

}  // namespace nnsynth
