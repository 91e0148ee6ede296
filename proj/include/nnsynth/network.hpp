// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file network.hpp Sparse feed-forward classifier with an explicit
/// connectivity mask. Connections may join any ordered layer pair (i, j),
/// i < j; multi-layer-perceptron connectivity is the special case where only
/// adjacent pairs carry connections. Masked weights are held at exactly zero,
/// so the forward pass reads raw weights and the mask only gates updates.

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnsynth/common.hpp"
#include "nnsynth/matrix.hpp"

namespace nnsynth {

enum class Connectivity { dense_adjacent, dense_all_pairs };

/// Connections from every neuron of layer `from` to every neuron of layer
/// `to`. Unallocated blocks (empty matrices) carry no connections but may be
/// materialized later by connection growth.
struct WeightBlock {
    Matrix w;                        // size(from) x size(to)
    std::vector<std::uint8_t> mask;  // same shape, row-major

    bool allocated() const { return !w.empty(); }

    std::size_t active_count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m;
        return n;
    }
};

class SparseNetwork {
public:
    std::vector<std::size_t> layer_sizes;     // [d_in, h_1..h_L, C]
    std::vector<WeightBlock> blocks;          // indexed by pair_index(i, j)
    std::vector<std::vector<double>> biases;  // biases[j-1] for layer j >= 1
    std::string activation = "relu_softmax";

    std::size_t layer_count() const { return layer_sizes.size(); }
    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }

    std::size_t pair_count() const {
        const std::size_t l = layer_count();
        return l * (l - 1) / 2;
    }

    /// Index of the (i, j) block, i < j, in enumeration order
    /// (0,1), (0,2), ..., (0,L), (1,2), ...
    std::size_t pair_index(std::size_t i, std::size_t j) const {
        const std::size_t l = layer_count();
        return i * l - i * (i + 1) / 2 + (j - i - 1);
    }

    struct PairId {
        std::size_t from, to;
    };

    PairId pair_of(std::size_t index) const {
        for (std::size_t i = 0; i + 1 < layer_count(); ++i) {
            const std::size_t row = layer_count() - 1 - i;
            if (index < row) return {i, i + 1 + index};
            index -= row;
        }
        throw std::invalid_argument("pair_of: index out of range");
    }

    WeightBlock& block(std::size_t i, std::size_t j) { return blocks[pair_index(i, j)]; }
    const WeightBlock& block(std::size_t i, std::size_t j) const {
        return blocks[pair_index(i, j)];
    }

    void allocate_block(std::size_t i, std::size_t j) {
        WeightBlock& b = block(i, j);
        if (b.allocated()) return;
        b.w = Matrix(layer_sizes[i], layer_sizes[j]);
        b.mask.assign(layer_sizes[i] * layer_sizes[j], 0);
    }

    /// Count of weights that currently exist as maskable storage.
    std::size_t maskable_weights() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.w.data.size();
        return n;
    }

    /// Mask population count; the parameter count reported everywhere.
    std::size_t active_weights() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.active_count();
        return n;
    }

    /// weight != 0 implies mask == 1. Checked after every train/grow/prune.
    bool mask_consistent() const {
        for (const auto& b : blocks)
            for (std::size_t x = 0; x < b.w.data.size(); ++x)
                if (b.w.data[x] != 0.0 && b.mask[x] == 0) return false;
        return true;
    }

    /// True when some input neuron reaches some output neuron through active
    /// connections.
    bool has_input_output_path() const {
        const std::size_t l = layer_count();
        std::vector<std::vector<std::uint8_t>> reach(l);
        for (std::size_t i = 0; i < l; ++i) reach[i].assign(layer_sizes[i], 0);
        reach[0].assign(layer_sizes[0], 1);
        for (std::size_t j = 1; j < l; ++j)
            for (std::size_t i = 0; i < j; ++i) {
                const WeightBlock& b = block(i, j);
                if (!b.allocated()) continue;
                for (std::size_t r = 0; r < layer_sizes[i]; ++r) {
                    if (!reach[i][r]) continue;
                    const std::size_t base = r * layer_sizes[j];
                    for (std::size_t c = 0; c < layer_sizes[j]; ++c)
                        if (b.mask[base + c]) reach[j][c] = 1;
                }
            }
        for (auto v : reach[l - 1])
            if (v) return true;
        return false;
    }

    /// Grows hidden layer `layer` by one neuron (appended last). All blocks
    /// touching the layer gain a zeroed, inactive row or column; the bias is
    /// zero. Wiring is the caller's job.
    void append_neuron(std::size_t layer) {
        if (layer == 0 || layer + 1 >= layer_count())
            throw std::invalid_argument("append_neuron: hidden layers only");
        for (std::size_t i = 0; i < layer; ++i) grow_block_cols(i, layer);
        for (std::size_t j = layer + 1; j < layer_count(); ++j) grow_block_rows(layer, j);
        ++layer_sizes[layer];
        biases[layer - 1].push_back(0.0);
    }

    /// Removes one hidden neuron together with its connections.
    void remove_neuron(std::size_t layer, std::size_t neuron) {
        if (layer == 0 || layer + 1 >= layer_count())
            throw std::invalid_argument("remove_neuron: hidden layers only");
        for (std::size_t i = 0; i < layer; ++i) drop_block_col(i, layer, neuron);
        for (std::size_t j = layer + 1; j < layer_count(); ++j) drop_block_row(layer, j, neuron);
        --layer_sizes[layer];
        biases[layer - 1].erase(biases[layer - 1].begin() + static_cast<std::ptrdiff_t>(neuron));
    }

private:
    void grow_block_cols(std::size_t i, std::size_t j) {
        WeightBlock& b = block(i, j);
        if (!b.allocated()) return;
        Matrix w(b.w.rows, b.w.cols + 1);
        std::vector<std::uint8_t> mask(w.rows * w.cols, 0);
        for (std::size_t r = 0; r < b.w.rows; ++r)
            for (std::size_t c = 0; c < b.w.cols; ++c) {
                w(r, c) = b.w(r, c);
                mask[r * w.cols + c] = b.mask[r * b.w.cols + c];
            }
        b.w = std::move(w);
        b.mask = std::move(mask);
    }

    void grow_block_rows(std::size_t i, std::size_t j) {
        WeightBlock& b = block(i, j);
        if (!b.allocated()) return;
        b.w.data.resize((b.w.rows + 1) * b.w.cols, 0.0);
        b.mask.resize((b.w.rows + 1) * b.w.cols, 0);
        ++b.w.rows;
    }

    void drop_block_col(std::size_t i, std::size_t j, std::size_t col) {
        WeightBlock& b = block(i, j);
        if (!b.allocated()) return;
        Matrix w(b.w.rows, b.w.cols - 1);
        std::vector<std::uint8_t> mask(w.rows * w.cols, 0);
        for (std::size_t r = 0; r < b.w.rows; ++r) {
            std::size_t out = 0;
            for (std::size_t c = 0; c < b.w.cols; ++c) {
                if (c == col) continue;
                w(r, out) = b.w(r, c);
                mask[r * w.cols + out] = b.mask[r * b.w.cols + c];
                ++out;
            }
        }
        b.w = std::move(w);
        b.mask = std::move(mask);
    }

    void drop_block_row(std::size_t i, std::size_t j, std::size_t row) {
        WeightBlock& b = block(i, j);
        if (!b.allocated()) return;
        b.w.data.erase(b.w.data.begin() + static_cast<std::ptrdiff_t>(row * b.w.cols),
                       b.w.data.begin() + static_cast<std::ptrdiff_t>((row + 1) * b.w.cols));
        b.mask.erase(b.mask.begin() + static_cast<std::ptrdiff_t>(row * b.w.cols),
                     b.mask.begin() + static_cast<std::ptrdiff_t>((row + 1) * b.w.cols));
        --b.w.rows;
    }
};

/// Builds a network with the requested connectivity fully active. Weights are
/// initialized uniform(-a, a) with a = sqrt(6 / fan_in); biases start at zero.
inline SparseNetwork build_network(const std::vector<std::size_t>& layer_sizes,
                                   Connectivity connectivity, std::uint64_t seed) {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("build_network: need at least input and output layers");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw std::invalid_argument("build_network: zero-size layer");

    SparseNetwork net;
    net.layer_sizes = layer_sizes;
    net.blocks.resize(net.pair_count());
    net.biases.resize(layer_sizes.size() - 1);
    for (std::size_t j = 1; j < layer_sizes.size(); ++j)
        net.biases[j - 1].assign(layer_sizes[j], 0.0);

    // Fan-in per target layer under the chosen connectivity.
    std::vector<std::size_t> fan_in(layer_sizes.size(), 0);
    for (std::size_t j = 1; j < layer_sizes.size(); ++j) {
        if (connectivity == Connectivity::dense_adjacent)
            fan_in[j] = layer_sizes[j - 1];
        else
            for (std::size_t i = 0; i < j; ++i) fan_in[j] += layer_sizes[i];
    }

    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i)
        for (std::size_t j = i + 1; j < layer_sizes.size(); ++j) {
            const bool wanted = connectivity == Connectivity::dense_all_pairs || j == i + 1;
            if (!wanted) continue;
            net.allocate_block(i, j);
            WeightBlock& b = net.block(i, j);
            const double a = std::sqrt(6.0 / static_cast<double>(fan_in[j]));
            for (std::size_t x = 0; x < b.w.data.size(); ++x) {
                b.w.data[x] = rng.uniform(-a, a);
                b.mask[x] = 1;
            }
        }
    return net;
}

struct ForwardTrace {
    std::vector<Matrix> activations;     // per layer, batch x size
    std::vector<Matrix> preactivations;  // per layer >= 1 (index j-1)
};

/// Computes class scores for a batch. Hidden layers apply the rectifier; the
/// output layer is linear (softmax is applied separately where probabilities
/// are needed).
inline Matrix forward(const SparseNetwork& net, const Matrix& batch,
                      ForwardTrace* trace = nullptr) {
    if (batch.cols != net.input_dim())
        throw std::invalid_argument("forward: batch width != input dimension");
    const std::size_t layers = net.layer_count();
    std::vector<Matrix> acts(layers);
    acts[0] = batch;
    if (trace) trace->preactivations.resize(layers - 1);

    for (std::size_t j = 1; j < layers; ++j) {
        Matrix z(batch.rows, net.layer_sizes[j]);
        for (std::size_t r = 0; r < z.rows; ++r) {
            const auto& bias = net.biases[j - 1];
            double* zr = z.row_ptr(r);
            for (std::size_t c = 0; c < z.cols; ++c) zr[c] = bias[c];
        }
        for (std::size_t i = 0; i < j; ++i) {
            const WeightBlock& b = net.block(i, j);
            if (!b.allocated()) continue;
            matmul_add(acts[i], b.w, z);
        }
        if (trace) trace->preactivations[j - 1] = z;
        if (j + 1 < layers)
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        acts[j] = std::move(z);
    }
    Matrix scores = acts.back();
    if (trace) trace->activations = std::move(acts);
    return scores;
}

/// Row-wise numerically stable softmax.
inline Matrix softmax(const Matrix& scores) {
    Matrix p = scores;
    for (std::size_t r = 0; r < p.rows; ++r) {
        double* row = p.row_ptr(r);
        double mx = row[0];
        for (std::size_t c = 1; c < p.cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < p.cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (std::size_t c = 0; c < p.cols; ++c) row[c] /= sum;
    }
    return p;
}

/// Argmax per row; ties resolve to the lowest class index.
inline std::vector<int> predict_classes(const Matrix& scores) {
    std::vector<int> out(scores.rows);
    for (std::size_t r = 0; r < scores.rows; ++r) {
        const double* row = scores.row_ptr(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < scores.cols; ++c)
            if (row[c] > row[best]) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

inline nlohmann::json network_to_json(const SparseNetwork& net) {
    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["layer_sizes"] = net.layer_sizes;
    doc["activation"] = net.activation;
    doc["biases"] = net.biases;
    nlohmann::json blocks = nlohmann::json::array();
    for (std::size_t idx = 0; idx < net.blocks.size(); ++idx) {
        const WeightBlock& b = net.blocks[idx];
        if (!b.allocated() || b.active_count() == 0) continue;
        const auto pair = net.pair_of(idx);
        nlohmann::json entries = nlohmann::json::array();
        for (std::size_t r = 0; r < b.w.rows; ++r)
            for (std::size_t c = 0; c < b.w.cols; ++c)
                if (b.mask[r * b.w.cols + c])
                    entries.push_back({r, c, b.w(r, c)});
        blocks.push_back({{"from", pair.from}, {"to", pair.to}, {"entries", entries}});
    }
    doc["blocks"] = blocks;
    return doc;
}

inline SparseNetwork network_from_json(const nlohmann::json& doc) {
    if (doc.at("format_version").get<int>() != 1)
        throw std::runtime_error("network: unsupported format version");
    SparseNetwork net;
    net.layer_sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
    net.activation = doc.at("activation").get<std::string>();
    net.biases = doc.at("biases").get<std::vector<std::vector<double>>>();
    net.blocks.resize(net.pair_count());
    for (const auto& jb : doc.at("blocks")) {
        const std::size_t i = jb.at("from").get<std::size_t>();
        const std::size_t j = jb.at("to").get<std::size_t>();
        net.allocate_block(i, j);
        WeightBlock& b = net.block(i, j);
        for (const auto& e : jb.at("entries")) {
            const std::size_t r = e.at(0).get<std::size_t>();
            const std::size_t c = e.at(1).get<std::size_t>();
            b.w(r, c) = e.at(2).get<double>();
            b.mask[r * b.w.cols + c] = 1;
        }
    }
    return net;
}

}  // namespace nnsynth
