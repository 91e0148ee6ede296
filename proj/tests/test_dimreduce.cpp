// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "nnsynth/dimreduce.hpp"

namespace nnsynth {
namespace {

Dataset gaussian_points(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.features = Matrix(n, d);
    for (auto& v : ds.features.data) v = rng.normal();
    ds.labels.assign(n, 0);
    ds.num_classes = 1;
    ds.split_tag = "train";
    return ds;
}

double squared_distance(const Matrix& m, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
        const double d = m(a, j) - m(b, j);
        s += d * d;
    }
    return s;
}

TEST(RpMatrix, SignVariantHasUnitEntries) {
    const Matrix phi = rp_matrix(40, 12, DrMethod::rp_sign, 3);
    for (double v : phi.data) EXPECT_DOUBLE_EQ(std::abs(v), 1.0);
}

TEST(RpMatrix, SparseVariantZeroFractionNearTwoThirds) {
    const Matrix phi = rp_matrix(300, 200, DrMethod::rp_sparse, 17);  // 60000 entries
    std::size_t zeros = 0;
    const double expected_magnitude = std::sqrt(3.0 / 200.0);
    for (double v : phi.data) {
        if (v == 0.0)
            ++zeros;
        else
            EXPECT_NEAR(std::abs(v), expected_magnitude, 1e-12);
    }
    const double fraction = static_cast<double>(zeros) / 60000.0;
    EXPECT_NEAR(fraction, 2.0 / 3.0, 0.01);
}

TEST(RpMatrix, DeterministicInSeed) {
    const Matrix a = rp_matrix(30, 10, DrMethod::rp_gauss_scaled, 99);
    const Matrix b = rp_matrix(30, 10, DrMethod::rp_gauss_scaled, 99);
    EXPECT_EQ(a.data, b.data);
    const Matrix c = rp_matrix(30, 10, DrMethod::rp_gauss_scaled, 100);
    EXPECT_NE(a.data, c.data);
}

TEST(RpMatrix, RejectsBadShapes) {
    EXPECT_THROW(rp_matrix(10, 11, DrMethod::rp_sign, 1), std::invalid_argument);
    EXPECT_THROW(rp_matrix(10, 0, DrMethod::rp_sign, 1), std::invalid_argument);
}

TEST(Project, IdentityMatrixPreservesDistancesExactly) {
    const auto ds = gaussian_points(30, 8, 5);
    Matrix eye(8, 8);
    for (std::size_t i = 0; i < 8; ++i) eye(i, i) = 1.0;
    const Dataset proj = project(ds, eye);
    for (std::size_t a = 0; a < 10; ++a)
        for (std::size_t b = a + 1; b < 10; ++b)
            EXPECT_DOUBLE_EQ(squared_distance(proj.features, a, b),
                             squared_distance(ds.features, a, b));
}

TEST(Project, GaussScaledKeepsMostPairwiseDistances) {
    const auto ds = gaussian_points(200, 100, 7);
    const Matrix phi = rp_matrix(100, 40, DrMethod::rp_gauss_scaled, 11);
    const Dataset proj = project(ds, phi);
    std::size_t total = 0, within = 0;
    for (std::size_t a = 0; a < ds.size(); ++a)
        for (std::size_t b = a + 1; b < ds.size(); ++b) {
            const double orig = squared_distance(ds.features, a, b);
            const double red = squared_distance(proj.features, a, b);
            ++total;
            if (red >= 0.5 * orig && red <= 1.5 * orig) ++within;
        }
    EXPECT_GE(static_cast<double>(within) / static_cast<double>(total), 0.95);
}

TEST(Project, LinearInTheSampleRow) {
    // Scaling a row by a power of two commutes with every rounding step, so
    // the projected row scales exactly.
    const auto ds = gaussian_points(4, 20, 9);
    const Matrix phi = rp_matrix(20, 6, DrMethod::rp_sparse, 13);
    Dataset doubled = ds;
    for (auto& v : doubled.features.data) v *= 2.0;
    const Dataset p1 = project(ds, phi);
    const Dataset p2 = project(doubled, phi);
    for (std::size_t i = 0; i < p1.features.data.size(); ++i)
        EXPECT_DOUBLE_EQ(p2.features.data[i], 2.0 * p1.features.data[i]);
}

TEST(Project, EmptyMatrixIsAnError) {
    const auto ds = gaussian_points(5, 4, 2);
    Matrix empty;
    EXPECT_THROW(project(ds, empty), std::invalid_argument);
}

TEST(Pca, RecoversExactPlanarSubspace) {
    // Points in a 2-D plane inside R^5: PCA with k=2 reconstructs exactly.
    Rng rng(23);
    const std::vector<double> u = {0.5, -0.1, 0.3, 0.7, -0.2};
    const std::vector<double> v = {-0.3, 0.6, 0.1, 0.0, 0.4};
    Dataset ds;
    ds.features = Matrix(40, 5);
    for (std::size_t r = 0; r < 40; ++r) {
        const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
        for (std::size_t j = 0; j < 5; ++j) ds.features(r, j) = a * u[j] + b * v[j] + 1.0;
    }
    ds.labels.assign(40, 0);
    ds.num_classes = 1;

    const PcaModel model = pca_fit(ds, 2);
    const Dataset scores = pca_transform(model, ds);
    for (std::size_t r = 0; r < 40; ++r)
        for (std::size_t j = 0; j < 5; ++j) {
            double rec = model.mean[j];
            for (std::size_t c = 0; c < 2; ++c)
                rec += scores.features(r, c) * model.components(j, c);
            EXPECT_NEAR(rec, ds.features(r, j), 1e-8);
        }
}

TEST(Pca, AnalyticTwoByTwoCovariance) {
    // Four points with sample covariance exactly [[2,1],[1,2]] (n-1 divisor):
    // principal axis (1,1)/sqrt(2), eigenvalue 3.
    Dataset ds;
    ds.features = Matrix(4, 2);
    const double a = 1.5, b = std::sqrt(3.0) / 2.0;
    ds.features.data = {a, a, -a, -a, b, -b, -b, b};
    ds.labels.assign(4, 0);
    ds.num_classes = 1;

    const PcaModel model = pca_fit(ds, 1);
    EXPECT_NEAR(model.eigenvalues[0], 3.0, 1e-8);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(model.components(0, 0), inv_sqrt2, 1e-8);
    EXPECT_NEAR(model.components(1, 0), inv_sqrt2, 1e-8);
}

TEST(Pca, FullRankKeepsTotalVariance) {
    const auto ds = gaussian_points(60, 6, 31);
    const PcaModel model = pca_fit(ds, 6);
    double eig_sum = 0.0;
    for (double e : model.eigenvalues) eig_sum += e;

    double trace = 0.0;
    std::vector<double> mean(6, 0.0);
    for (std::size_t r = 0; r < 60; ++r)
        for (std::size_t j = 0; j < 6; ++j) mean[j] += ds.features(r, j) / 60.0;
    for (std::size_t r = 0; r < 60; ++r)
        for (std::size_t j = 0; j < 6; ++j) {
            const double d = ds.features(r, j) - mean[j];
            trace += d * d / 59.0;
        }
    EXPECT_NEAR(eig_sum, trace, 1e-8);

    for (std::size_t i = 1; i < model.eigenvalues.size(); ++i)
        EXPECT_LE(model.eigenvalues[i], model.eigenvalues[i - 1] + 1e-10);
}

TEST(Pca, ComponentsAreOrthonormal) {
    const auto ds = gaussian_points(50, 7, 41);
    const PcaModel model = pca_fit(ds, 5);
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = 0; b < 5; ++b) {
            double dot = 0.0;
            for (std::size_t j = 0; j < 7; ++j)
                dot += model.components(j, a) * model.components(j, b);
            EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-8);
        }
}

TEST(Pca, RejectsTooManyComponents) {
    const auto ds = gaussian_points(10, 3, 1);
    EXPECT_THROW(pca_fit(ds, 4), std::invalid_argument);
}

TEST(Pca, RankDeficientDataKeepsOrthonormalComponentsAndZeroEigenvalues) {
    // Rank-1 data in R^4 with k = 3: one positive eigenvalue, two zeros,
    // components orthonormal throughout.
    Rng rng(61);
    const std::vector<double> direction = {0.5, -0.5, 0.5, 0.5};
    Dataset ds;
    ds.features = Matrix(30, 4);
    for (std::size_t r = 0; r < 30; ++r) {
        const double a = rng.uniform(-3.0, 3.0);
        for (std::size_t j = 0; j < 4; ++j) ds.features(r, j) = a * direction[j];
    }
    ds.labels.assign(30, 0);
    ds.num_classes = 1;

    const PcaModel model = pca_fit(ds, 3);
    EXPECT_GT(model.eigenvalues[0], 0.0);
    EXPECT_NEAR(model.eigenvalues[1], 0.0, 1e-10);
    EXPECT_NEAR(model.eigenvalues[2], 0.0, 1e-10);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
            double dot = 0.0;
            for (std::size_t j = 0; j < 4; ++j)
                dot += model.components(j, a) * model.components(j, b);
            EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-8);
        }
}

TEST(Quantize, FullPrecisionIsIdentity) {
    const auto net = build_network({3, 5, 2}, Connectivity::dense_adjacent, 2);
    const auto q = quantize(net, QuantSpec{32});
    for (std::size_t i = 0; i < net.blocks.size(); ++i)
        EXPECT_EQ(q.blocks[i].w.data, net.blocks[i].w.data);
}

TEST(Quantize, HandComputedFourBitExample) {
    auto net = build_network({3, 1}, Connectivity::dense_adjacent, 2);
    net.block(0, 1).w.data = {-1.0, 0.4, 0.7};
    const auto q = quantize(net, QuantSpec{4});
    const double delta = 1.0 / 7.0;
    EXPECT_DOUBLE_EQ(q.block(0, 1).w.data[0], -1.0);
    EXPECT_DOUBLE_EQ(q.block(0, 1).w.data[1], 3.0 * delta);
    EXPECT_DOUBLE_EQ(q.block(0, 1).w.data[2], 5.0 * delta);
}

TEST(Quantize, ErrorBoundedByHalfDelta) {
    for (int bits : {4, 8, 16}) {
        auto net = build_network({6, 9, 4}, Connectivity::dense_adjacent, 77);
        const auto q = quantize(net, QuantSpec{bits});
        const double levels = static_cast<double>((1 << (bits - 1)) - 1);
        for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
            if (!net.blocks[bi].allocated()) continue;
            double maxabs = 0.0;
            for (double v : net.blocks[bi].w.data) maxabs = std::max(maxabs, std::abs(v));
            const double delta = maxabs / levels;
            for (std::size_t x = 0; x < net.blocks[bi].w.data.size(); ++x)
                EXPECT_LE(std::abs(q.blocks[bi].w.data[x] - net.blocks[bi].w.data[x]),
                          delta / 2 + 1e-15);
        }
    }
}

TEST(Quantize, Idempotent) {
    for (int bits : {4, 8, 16, 32}) {
        const auto net = build_network({5, 11, 3}, Connectivity::dense_adjacent, 123);
        const auto once = quantize(net, QuantSpec{bits});
        const auto twice = quantize(once, QuantSpec{bits});
        for (std::size_t i = 0; i < net.blocks.size(); ++i)
            EXPECT_EQ(twice.blocks[i].w.data, once.blocks[i].w.data);
    }
}

TEST(Quantize, TamperedStepWidthViolatesTheBound) {
    // Mutation check on the bound itself: quantizing with a doubled step
    // produces errors the delta/2 criterion must catch.
    const auto net = build_network({6, 9, 4}, Connectivity::dense_adjacent, 77);
    bool violation = false;
    for (std::size_t bi = 0; bi < net.blocks.size(); ++bi) {
        if (!net.blocks[bi].allocated()) continue;
        double maxabs = 0.0;
        for (double v : net.blocks[bi].w.data) maxabs = std::max(maxabs, std::abs(v));
        const double delta = maxabs / 7.0;  // 4-bit step
        for (double w : net.blocks[bi].w.data) {
            const double tampered = std::round(w / (2 * delta)) * (2 * delta);
            if (std::abs(tampered - w) > delta / 2 + 1e-15) violation = true;
        }
    }
    EXPECT_TRUE(violation);
}

TEST(Quantize, AllZeroBlockIsIdentity) {
    auto net = build_network({2, 2}, Connectivity::dense_adjacent, 1);
    std::fill(net.block(0, 1).w.data.begin(), net.block(0, 1).w.data.end(), 0.0);
    const auto q = quantize(net, QuantSpec{4});
    EXPECT_EQ(q.block(0, 1).w.data, net.block(0, 1).w.data);
}

TEST(Quantize, RejectsUnsupportedWidths) {
    const auto net = build_network({2, 2}, Connectivity::dense_adjacent, 1);
    EXPECT_THROW(quantize(net, QuantSpec{7}), std::invalid_argument);
}

class PrecomputedFiles : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() / "nnsynth_dr_test";
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }

    std::string path(const char* name) const { return (dir_ / name).string(); }

    static Dataset small(std::size_t n, std::size_t d, std::uint64_t seed) {
        auto ds = gaussian_points(n, d, seed);
        for (std::size_t r = 0; r < n; ++r) ds.labels[r] = static_cast<int>(r % 2);
        ds.num_classes = 2;
        return ds;
    }

    std::filesystem::path dir_;
};

TEST_F(PrecomputedFiles, RoundTripReloadsIdenticalMatrices) {
    const auto train = small(12, 20, 1);
    const auto val = small(6, 20, 2);
    const auto test = small(6, 20, 3);
    write_labeled_csv(train, path("train.csv"));
    write_labeled_csv(val, path("val.csv"));
    write_labeled_csv(test, path("test.csv"));

    const auto triple = load_precomputed(path("train.csv"), path("val.csv"), path("test.csv"),
                                         std::array<std::size_t, 3>{12, 6, 6});
    EXPECT_EQ(triple.train.dim(), 20u);
    EXPECT_EQ(triple.train.features.data, train.features.data);
    EXPECT_EQ(triple.val.features.data, val.features.data);
    EXPECT_EQ(triple.test.features.data, test.features.data);
    EXPECT_EQ(triple.train.labels, train.labels);
}

TEST_F(PrecomputedFiles, WidthMismatchIsAnError) {
    write_labeled_csv(small(10, 20, 1), path("train.csv"));
    write_labeled_csv(small(5, 19, 2), path("val.csv"));
    write_labeled_csv(small(5, 20, 3), path("test.csv"));
    EXPECT_THROW(load_precomputed(path("train.csv"), path("val.csv"), path("test.csv")),
                 std::runtime_error);
}

TEST_F(PrecomputedFiles, RowCountMismatchIsAnError) {
    write_labeled_csv(small(10, 8, 1), path("train.csv"));
    write_labeled_csv(small(5, 8, 2), path("val.csv"));
    write_labeled_csv(small(5, 8, 3), path("test.csv"));
    EXPECT_THROW(load_precomputed(path("train.csv"), path("val.csv"), path("test.csv"),
                                  std::array<std::size_t, 3>{10, 5, 4}),
                 std::runtime_error);
}

TEST(DrConfig, ReducedDimFromRatio) {
    DrConfig dr;
    dr.ratio = 2.0;
    EXPECT_EQ(dr.reduced_dim(16), 8u);
    dr.ratio = 20.0;
    EXPECT_EQ(dr.reduced_dim(16), 1u);  // floor at 1
    dr.ratio = 1.0;
    EXPECT_EQ(dr.reduced_dim(16), 16u);
    dr.ratio = 3.0;
    EXPECT_EQ(dr.reduced_dim(16), 5u);  // round(16/3) = 5
}

}  // namespace
}  // namespace nnsynth
