// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "nnsynth/train.hpp"

namespace nnsynth {
namespace {

Dataset xor_dataset() {
    Dataset ds;
    ds.features = Matrix(4, 2);
    ds.features.data = {0, 0, 0, 1, 1, 0, 1, 1};
    ds.labels = {0, 1, 1, 0};
    ds.num_classes = 2;
    ds.split_tag = "train";
    return ds;
}

Dataset random_dataset(std::size_t n, std::size_t d, int classes, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.features = Matrix(n, d);
    for (auto& v : ds.features.data) v = rng.uniform(-1.5, 1.5);
    ds.labels.resize(n);
    for (auto& y : ds.labels) y = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    ds.num_classes = classes;
    ds.split_tag = "train";
    return ds;
}

// Randomly masks off a share of the connections, zeroing the weights.
void sparsify(SparseNetwork& net, double drop, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& b : net.blocks)
        if (b.allocated())
            for (std::size_t x = 0; x < b.mask.size(); ++x)
                if (rng.uniform() < drop) {
                    b.mask[x] = 0;
                    b.w.data[x] = 0.0;
                }
}

TEST(Gradient, MatchesCentralFiniteDifferences) {
    auto net = build_network({3, 4, 2}, Connectivity::dense_all_pairs, 31);
    sparsify(net, 0.25, 32);
    // Nonzero biases keep disconnected neurons off the rectifier kink, where
    // the finite-difference oracle does not apply.
    Rng brng(34);
    for (auto& layer : net.biases)
        for (auto& v : layer) v = (brng.uniform() < 0.5 ? 1.0 : -1.0) * brng.uniform(0.1, 0.5);
    const auto data = random_dataset(12, 3, 2, 33);

    const Gradients g = gradient(net, data.features, data.labels, GradScope::all_pairs);
    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
        if (!net.blocks[bi].allocated()) continue;
        for (std::size_t x = 0; x < net.blocks[bi].w.data.size(); ++x) {
            SparseNetwork plus = net, minus = net;
            plus.blocks[bi].w.data[x] += h;
            minus.blocks[bi].w.data[x] -= h;
            const double fd = (mean_cross_entropy(plus, data.features, data.labels) -
                               mean_cross_entropy(minus, data.features, data.labels)) /
                              (2 * h);
            const double rel = std::abs(g.blocks[bi].data[x] - fd) / std::max(std::abs(fd), 1.0);
            max_rel = std::max(max_rel, rel);
        }
    }
    for (std::size_t li = 0; li < net.biases.size(); ++li)
        for (std::size_t x = 0; x < net.biases[li].size(); ++x) {
            SparseNetwork plus = net, minus = net;
            plus.biases[li][x] += h;
            minus.biases[li][x] -= h;
            const double fd = (mean_cross_entropy(plus, data.features, data.labels) -
                               mean_cross_entropy(minus, data.features, data.labels)) /
                              (2 * h);
            const double rel = std::abs(g.biases[li][x] - fd) / std::max(std::abs(fd), 1.0);
            max_rel = std::max(max_rel, rel);
        }
    EXPECT_LT(max_rel, 1e-4);
}

TEST(Gradient, DuplicatedBatchRowLeavesMeanGradientUnchanged) {
    auto net = build_network({3, 4, 2}, Connectivity::dense_adjacent, 5);
    Matrix one(1, 3);
    one.data = {0.4, -0.7, 1.1};
    Matrix two(2, 3);
    two.data = {0.4, -0.7, 1.1, 0.4, -0.7, 1.1};
    const Gradients g1 = gradient(net, one, {1});
    const Gradients g2 = gradient(net, two, {1, 1});
    for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
        if (!net.blocks[bi].allocated()) continue;
        EXPECT_EQ(g1.blocks[bi].data, g2.blocks[bi].data);
    }
    EXPECT_EQ(g1.biases, g2.biases);
}

TEST(Gradient, SymmetricNetworkGetsSymmetricGradients) {
    // All-zero weights, symmetric batch: the two output bias gradients must
    // agree whenever the labels are balanced across the two classes.
    auto net = build_network({2, 2, 2}, Connectivity::dense_adjacent, 8);
    for (auto& b : net.blocks)
        if (b.allocated()) std::fill(b.w.data.begin(), b.w.data.end(), 0.0);
    Matrix batch(2, 2);
    batch.data = {0.6, -0.2, 0.6, -0.2};
    const Gradients g = gradient(net, batch, {0, 1});
    EXPECT_NEAR(g.biases.back()[0], g.biases.back()[1], 1e-15);
}

TEST(Gradient, EmptyBatchIsAnError) {
    const auto net = build_network({2, 2}, Connectivity::dense_adjacent, 1);
    Matrix batch(0, 2);
    EXPECT_THROW(gradient(net, batch, {}), std::invalid_argument);
}

TEST(Train, LearnsXorExactly) {
    const auto data = xor_dataset();
    auto net = build_network({2, 4, 2}, Connectivity::dense_adjacent, 42);
    TrainConfig cfg;
    cfg.optimizer = Optimizer::adam;
    cfg.learning_rate = 0.01;
    cfg.weight_decay = 0.0;
    cfg.epochs = 500;
    cfg.batch_size = 4;
    cfg.seed = 42;
    const TrainResult result = train(net, data, data, cfg);
    EXPECT_FALSE(result.diverged);
    // Known separable: verify by evaluating every one of the four points.
    EXPECT_DOUBLE_EQ(evaluate(result.net, data), 1.0);
}

TEST(Train, ZeroEpochsIsAnError) {
    const auto data = xor_dataset();
    const auto net = build_network({2, 2, 2}, Connectivity::dense_adjacent, 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(train(net, data, data, cfg), std::invalid_argument);
}

TEST(Train, SameSeedSameResultBitForBit) {
    const auto data = random_dataset(60, 4, 3, 77);
    const auto net = build_network({4, 6, 3}, Connectivity::dense_adjacent, 7);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 16;
    cfg.seed = 1234;
    const TrainResult a = train(net, data, data, cfg);
    const TrainResult b = train(net, data, data, cfg);
    EXPECT_EQ(a.best_val_accuracy, b.best_val_accuracy);
    for (std::size_t i = 0; i < a.net.blocks.size(); ++i)
        EXPECT_EQ(a.net.blocks[i].w.data, b.net.blocks[i].w.data);
    EXPECT_EQ(a.net.biases, b.net.biases);
}

TEST(Train, MaskedWeightsStayExactlyZero) {
    const auto data = random_dataset(80, 5, 3, 90);
    auto net = build_network({5, 8, 3}, Connectivity::dense_adjacent, 13);
    sparsify(net, 0.5, 14);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.seed = 5;
    const TrainResult result = train(net, data, data, cfg);
    EXPECT_TRUE(result.net.mask_consistent());
    for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
        if (!net.blocks[bi].allocated()) continue;
        for (std::size_t x = 0; x < net.blocks[bi].mask.size(); ++x) {
            if (!net.blocks[bi].mask[x]) {
                EXPECT_EQ(result.net.blocks[bi].w.data[x], 0.0);
            }
        }
    }
}

TEST(Train, DivergenceIsFlaggedNotThrown) {
    const auto data = random_dataset(40, 3, 2, 55);
    const auto net = build_network({3, 5, 2}, Connectivity::dense_adjacent, 3);
    TrainConfig cfg;
    cfg.optimizer = Optimizer::sgd_momentum;
    cfg.learning_rate = 1e18;
    cfg.epochs = 10;
    cfg.seed = 6;
    const TrainResult result = train(net, data, data, cfg);
    EXPECT_TRUE(result.diverged);
}

TEST(Evaluate, ConstantPredictorOnSingleClassDataIsPerfect) {
    auto net = build_network({2, 3}, Connectivity::dense_adjacent, 1);
    for (auto& b : net.blocks) std::fill(b.w.data.begin(), b.w.data.end(), 0.0);
    net.biases[0] = {0.0, 5.0, 0.0};  // always predicts class 1
    Dataset ds;
    ds.features = Matrix(10, 2, 0.5);
    ds.labels.assign(10, 1);
    ds.num_classes = 3;
    EXPECT_DOUBLE_EQ(evaluate(net, ds), 1.0);
}

TEST(Evaluate, UniformScoresBreakTiesTowardLowestClass) {
    auto net = build_network({2, 4}, Connectivity::dense_adjacent, 1);
    for (auto& b : net.blocks) std::fill(b.w.data.begin(), b.w.data.end(), 0.0);
    Dataset ds;
    ds.features = Matrix(6, 2, 1.0);
    ds.labels.assign(6, 0);
    ds.num_classes = 4;
    EXPECT_DOUBLE_EQ(evaluate(net, ds), 1.0);
}

TEST(Evaluate, MatchesIndependentRecount) {
    const auto data = random_dataset(100, 6, 10, 123);
    const auto net = build_network({6, 12, 10}, Connectivity::dense_adjacent, 9);
    const double reported = evaluate(net, data);

    const Matrix scores = forward(net, data.features);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < scores.rows; ++r) {
        int arg = 0;
        for (int c = 1; c < 10; ++c)
            if (scores(r, static_cast<std::size_t>(c)) > scores(r, static_cast<std::size_t>(arg)))
                arg = c;
        if (arg == data.labels[r]) ++correct;
    }
    EXPECT_DOUBLE_EQ(reported, static_cast<double>(correct) / 100.0);
}

}  // namespace
}  // namespace nnsynth
