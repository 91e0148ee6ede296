// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file train.hpp Cross-entropy training and evaluation for SparseNetwork.
/// Training is strictly sequential and fully determined by
/// (network, data, config): same seed, same bits.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "nnsynth/dataset.hpp"
#include "nnsynth/network.hpp"

namespace nnsynth {

enum class Optimizer { sgd_momentum, adam };

struct TrainConfig {
    Optimizer optimizer = Optimizer::adam;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    int epochs = 50;
    int batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
        if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    }
};

/// Per-entry gradients shaped like the network. Entries for masked or
/// unallocated positions are plain loss derivatives as if the connection were
/// live at its current (zero) weight; connection growth scores them directly.
struct Gradients {
    std::vector<Matrix> blocks;                // indexed like net.blocks
    std::vector<std::vector<double>> biases;   // indexed like net.biases
    double loss = 0.0;
};

enum class GradScope { allocated_blocks, all_pairs };

/// Mean cross-entropy over the batch, no regularization term.
inline double mean_cross_entropy(const SparseNetwork& net, const Matrix& batch,
                                 const std::vector<int>& labels) {
    const Matrix probs = softmax(forward(net, batch));
    double loss = 0.0;
    for (std::size_t r = 0; r < batch.rows; ++r) {
        const double p = probs(r, static_cast<std::size_t>(labels[r]));
        loss -= std::log(std::max(p, 1e-300));
    }
    return loss / static_cast<double>(batch.rows);
}

/// Backpropagation of the mean cross-entropy.
inline Gradients gradient(const SparseNetwork& net, const Matrix& batch,
                          const std::vector<int>& labels,
                          GradScope scope = GradScope::allocated_blocks) {
    if (batch.rows == 0) throw std::invalid_argument("gradient: empty batch");
    if (batch.cols != net.input_dim())
        throw std::invalid_argument("gradient: batch width != input dimension");

    ForwardTrace trace;
    forward(net, batch, &trace);
    const std::size_t layers = net.layer_count();
    const double inv_n = 1.0 / static_cast<double>(batch.rows);

    // delta[j] = dLoss/d preactivation of layer j.
    std::vector<Matrix> delta(layers);
    delta[layers - 1] = softmax(trace.preactivations[layers - 2]);
    for (std::size_t r = 0; r < batch.rows; ++r) {
        delta[layers - 1](r, static_cast<std::size_t>(labels[r])) -= 1.0;
        for (std::size_t c = 0; c < net.output_dim(); ++c) delta[layers - 1](r, c) *= inv_n;
    }
    double loss = 0.0;
    {
        const Matrix probs = softmax(trace.preactivations[layers - 2]);
        for (std::size_t r = 0; r < batch.rows; ++r)
            loss -= std::log(std::max(probs(r, static_cast<std::size_t>(labels[r])), 1e-300));
        loss *= inv_n;
    }

    for (std::size_t j = layers - 2; j >= 1; --j) {
        Matrix d(batch.rows, net.layer_sizes[j]);
        for (std::size_t k = j + 1; k < layers; ++k) {
            const WeightBlock& b = net.block(j, k);
            if (!b.allocated()) continue;
            matmul_transpose_b_add(delta[k], b.w, d);
        }
        const Matrix& z = trace.preactivations[j - 1];
        for (std::size_t x = 0; x < d.data.size(); ++x)
            if (z.data[x] <= 0.0) d.data[x] = 0.0;
        delta[j] = std::move(d);
    }

    Gradients g;
    g.loss = loss;
    g.blocks.resize(net.pair_count());
    g.biases.resize(layers - 1);
    for (std::size_t j = 1; j < layers; ++j) {
        g.biases[j - 1].assign(net.layer_sizes[j], 0.0);
        for (std::size_t r = 0; r < batch.rows; ++r)
            for (std::size_t c = 0; c < net.layer_sizes[j]; ++c)
                g.biases[j - 1][c] += delta[j](r, c);
        for (std::size_t i = 0; i < j; ++i) {
            const bool want = scope == GradScope::all_pairs || net.block(i, j).allocated();
            if (!want) continue;
            Matrix gb(net.layer_sizes[i], net.layer_sizes[j]);
            matmul_transpose_a_add(trace.activations[i], delta[j], gb);
            g.blocks[net.pair_index(i, j)] = std::move(gb);
        }
    }
    return g;
}

/// Exact classification accuracy, correct / N. Ties at the argmax go to the
/// lowest class index.
inline double evaluate(const SparseNetwork& net, const Dataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    if (ds.dim() != net.input_dim())
        throw std::invalid_argument("evaluate: dataset width != input dimension");
    const auto predicted = predict_classes(forward(net, ds.features));
    std::size_t correct = 0;
    for (std::size_t r = 0; r < ds.size(); ++r)
        if (predicted[r] == ds.labels[r]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

struct TrainResult {
    SparseNetwork net;           // snapshot with the best validation accuracy
    double best_val_accuracy = 0.0;
    int best_epoch = -1;
    bool diverged = false;
};

namespace detail {

struct OptState {
    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    std::uint64_t step = 0;
};

inline void init_opt_state(const SparseNetwork& net, OptState& st) {
    st.m_w.resize(net.blocks.size());
    st.v_w.resize(net.blocks.size());
    for (std::size_t i = 0; i < net.blocks.size(); ++i)
        if (net.blocks[i].allocated()) {
            st.m_w[i] = Matrix(net.blocks[i].w.rows, net.blocks[i].w.cols);
            st.v_w[i] = Matrix(net.blocks[i].w.rows, net.blocks[i].w.cols);
        }
    st.m_b.resize(net.biases.size());
    st.v_b.resize(net.biases.size());
    for (std::size_t i = 0; i < net.biases.size(); ++i) {
        st.m_b[i].assign(net.biases[i].size(), 0.0);
        st.v_b[i].assign(net.biases[i].size(), 0.0);
    }
}

inline void apply_update(double& w, double g, double& m, double& v, const TrainConfig& cfg,
                         std::uint64_t step) {
    if (cfg.optimizer == Optimizer::adam) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        const double mhat = m / (1.0 - std::pow(b1, static_cast<double>(step)));
        const double vhat = v / (1.0 - std::pow(b2, static_cast<double>(step)));
        w -= cfg.learning_rate * mhat / (std::sqrt(vhat) + eps);
    } else {
        m = cfg.momentum * m + g;
        w -= cfg.learning_rate * m;
    }
}

}  // namespace detail

/// Minibatch training. The loss is mean cross-entropy plus
/// weight_decay * (1/2)·Σ w² over active weights, with the decay term folded
/// into the gradient. After every epoch the validation accuracy is measured
/// and the best-so-far weights are snapshotted; the snapshot is what is
/// returned. A non-finite batch loss stops training and sets `diverged`.
inline TrainResult train(const SparseNetwork& initial, const Dataset& train_ds,
                         const Dataset& val_ds, const TrainConfig& cfg) {
    cfg.validate();
    if (train_ds.size() == 0) throw std::invalid_argument("train: empty training set");
    if (train_ds.dim() != initial.input_dim() || val_ds.dim() != initial.input_dim())
        throw std::invalid_argument("train: dataset width != input dimension");
    const int classes = static_cast<int>(initial.output_dim());
    for (int y : train_ds.labels)
        if (y >= classes) throw std::invalid_argument("train: label >= output dimension");

    SparseNetwork net = initial;
    detail::OptState opt;
    detail::init_opt_state(net, opt);
    Rng rng(cfg.seed);

    TrainResult result;
    result.best_val_accuracy = -1.0;

    const std::size_t n = train_ds.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t count = std::min(bs, n - start);
            Matrix xb(count, train_ds.dim());
            std::vector<int> yb(count);
            for (std::size_t r = 0; r < count; ++r) {
                const std::size_t src = order[start + r];
                for (std::size_t j = 0; j < train_ds.dim(); ++j)
                    xb(r, j) = train_ds.features(src, j);
                yb[r] = train_ds.labels[src];
            }

            Gradients g = gradient(net, xb, yb);
            if (!std::isfinite(g.loss)) {
                result.diverged = true;
                if (result.best_epoch < 0) {
                    result.net = net;
                    result.best_val_accuracy = 0.0;
                }
                return result;
            }

            ++opt.step;
            for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
                WeightBlock& b = net.blocks[bi];
                if (!b.allocated()) continue;
                Matrix& gb = g.blocks[bi];
                for (std::size_t x = 0; x < b.w.data.size(); ++x) {
                    if (!b.mask[x]) continue;
                    const double grad = gb.data[x] + cfg.weight_decay * b.w.data[x];
                    detail::apply_update(b.w.data[x], grad, opt.m_w[bi].data[x],
                                         opt.v_w[bi].data[x], cfg, opt.step);
                }
            }
            for (std::size_t li = 0; li < net.biases.size(); ++li)
                for (std::size_t x = 0; x < net.biases[li].size(); ++x)
                    detail::apply_update(net.biases[li][x], g.biases[li][x], opt.m_b[li][x],
                                         opt.v_b[li][x], cfg, opt.step);
        }

        const double val_acc = evaluate(net, val_ds);
        if (val_acc > result.best_val_accuracy) {
            result.best_val_accuracy = val_acc;
            result.best_epoch = epoch;
            result.net = net;
        }
    }
    return result;
}

}  // namespace nnsynth
