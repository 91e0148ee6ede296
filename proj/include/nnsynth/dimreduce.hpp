// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file dimreduce.hpp Feature-space transforms selected by the architecture
/// gene: four random-projection variants, PCA, and k-bit inference
/// quantization of network weights.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nnsynth/dataset.hpp"
#include "nnsynth/network.hpp"

namespace nnsynth {

enum class DrMethod {
    rp_gauss_scaled,  // entries ~ N(0, 1/k)
    rp_gauss_unit,    // entries ~ N(0, 1)
    rp_sign,          // +1 / -1, equal probability
    rp_sparse,        // sqrt(3/k) * {+1: 1/6, 0: 2/3, -1: 1/6}
    pca,
    precomputed,
    none,
};

inline const char* dr_method_name(DrMethod m) {
    switch (m) {
        case DrMethod::rp_gauss_scaled: return "rp_gauss_scaled";
        case DrMethod::rp_gauss_unit: return "rp_gauss_unit";
        case DrMethod::rp_sign: return "rp_sign";
        case DrMethod::rp_sparse: return "rp_sparse";
        case DrMethod::pca: return "pca";
        case DrMethod::precomputed: return "precomputed";
        case DrMethod::none: return "none";
    }
    return "?";
}

struct DrConfig {
    DrMethod method = DrMethod::none;
    double ratio = 1.0;  // d/k compression ratio, >= 1
    std::uint64_t seed = 0;

    /// k = max(1, round(d / ratio)).
    std::size_t reduced_dim(std::size_t d) const {
        if (ratio < 1.0) throw std::invalid_argument("dr: ratio must be >= 1");
        auto k = static_cast<std::size_t>(
            std::llround(static_cast<double>(d) / ratio));
        if (k < 1) k = 1;
        if (k > d) k = d;
        return k;
    }
};

struct QuantSpec {
    int bits = 32;  // one of 4, 8, 16, 32; 32 is full precision

    void validate() const {
        if (bits != 4 && bits != 8 && bits != 16 && bits != 32)
            throw std::invalid_argument("quant: bits must be 4, 8, 16, or 32");
    }
};

/// Draws the d x k projection matrix for one of the random-projection
/// variants. Deterministic in the seed; the data is never consulted.
inline Matrix rp_matrix(std::size_t d, std::size_t k, DrMethod variant, std::uint64_t seed) {
    if (k == 0) throw std::invalid_argument("rp_matrix: k must be >= 1");
    if (k > d) throw std::invalid_argument("rp_matrix: k must not exceed d");
    Matrix phi(d, k);
    Rng rng(derive_seed(seed, "rp_matrix", static_cast<std::uint64_t>(variant), k));
    switch (variant) {
        case DrMethod::rp_gauss_scaled: {
            const double sd = 1.0 / std::sqrt(static_cast<double>(k));
            for (double& v : phi.data) v = rng.normal(0.0, sd);
            break;
        }
        case DrMethod::rp_gauss_unit:
            for (double& v : phi.data) v = rng.normal();
            break;
        case DrMethod::rp_sign:
            for (double& v : phi.data) v = rng.uniform() < 0.5 ? 1.0 : -1.0;
            break;
        case DrMethod::rp_sparse: {
            const double s = std::sqrt(3.0 / static_cast<double>(k));
            for (double& v : phi.data) {
                const double u = rng.uniform();
                v = u < 1.0 / 6.0 ? s : (u < 5.0 / 6.0 ? 0.0 : -s);
            }
            break;
        }
        default:
            throw std::invalid_argument("rp_matrix: not a random-projection variant");
    }
    return phi;
}

/// Applies a projection matrix to the feature block; labels pass through.
inline Dataset project(const Dataset& ds, const Matrix& projection) {
    if (projection.empty()) throw std::invalid_argument("project: empty matrix");
    if (ds.dim() != projection.rows)
        throw std::invalid_argument("project: matrix rows != feature width");
    Dataset out;
    out.features = matmul(ds.features, projection);
    out.labels = ds.labels;
    out.num_classes = ds.num_classes;
    out.split_tag = ds.split_tag;
    return out;
}

struct PcaModel {
    std::vector<double> mean;       // length d
    Matrix components;              // d x k, orthonormal columns
    std::vector<double> eigenvalues;  // length k, non-increasing
};

/// PCA via iterated deflated power method (tolerance 1e-10). Fit consumes the
/// training split only. Rank deficiency is allowed; exhausted directions get
/// zero eigenvalues and deterministic orthonormal filler vectors.
inline PcaModel pca_fit(const Dataset& train, std::size_t k) {
    const std::size_t d = train.dim();
    const std::size_t n = train.size();
    if (k == 0 || k > d) throw std::invalid_argument("pca_fit: need 1 <= k <= d");

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) model.mean[j] += train.features(r, j);
    for (double& m : model.mean) m /= static_cast<double>(n);

    // Sample covariance with the n-1 divisor.
    Matrix cov(d, d);
    const double divisor = n > 1 ? static_cast<double>(n - 1) : 1.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = train.features(r, a) - model.mean[a];
            if (xa == 0.0) continue;
            for (std::size_t b = 0; b < d; ++b)
                cov(a, b) += xa * (train.features(r, b) - model.mean[b]);
        }
    for (double& v : cov.data) v /= divisor;

    model.components = Matrix(d, k);
    model.eigenvalues.assign(k, 0.0);
    std::vector<std::vector<double>> found;

    auto orthogonalize = [&](std::vector<double>& v) {
        for (const auto& u : found) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += v[j] * u[j];
            for (std::size_t j = 0; j < d; ++j) v[j] -= dot * u[j];
        }
    };
    auto norm = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };

    for (std::size_t comp = 0; comp < k; ++comp) {
        std::vector<double> v(d);
        for (std::size_t j = 0; j < d; ++j)
            v[j] = 1.0 + 0.001 * static_cast<double>((j * 2654435761u + comp) % 97);
        orthogonalize(v);
        double nv = norm(v);
        if (nv < 1e-12) {
            // Deterministic filler orthogonal to everything found so far.
            for (std::size_t basis = 0; basis < d; ++basis) {
                std::fill(v.begin(), v.end(), 0.0);
                v[basis] = 1.0;
                orthogonalize(v);
                nv = norm(v);
                if (nv >= 1e-6) break;
            }
        }
        for (double& x : v) x /= nv;

        double eigenvalue = 0.0;
        std::vector<double> next(d);
        for (int iter = 0; iter < 10000; ++iter) {
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t a = 0; a < d; ++a) {
                const double va = v[a];
                if (va == 0.0) continue;
                const double* row = cov.row_ptr(a);
                for (std::size_t b = 0; b < d; ++b) next[b] += va * row[b];
            }
            orthogonalize(next);
            const double nn = norm(next);
            if (nn < 1e-14) {
                eigenvalue = 0.0;
                break;
            }
            double diff = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                next[j] /= nn;
                diff = std::max(diff, std::abs(next[j] - v[j]));
            }
            // Sign flips between iterations mean the eigenvalue sign is
            // negative or the start was mirrored; compare against -v too.
            double diff_neg = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                diff_neg = std::max(diff_neg, std::abs(next[j] + v[j]));
            v = next;
            eigenvalue = nn;
            if (std::min(diff, diff_neg) < 1e-10) break;
        }

        if (eigenvalue < 1e-14) {
            eigenvalue = 0.0;
            // Keep the current (orthonormalized) direction as a filler.
        }
        // Canonical sign: the largest-magnitude coordinate is positive.
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
        if (v[arg] < 0.0)
            for (double& x : v) x = -x;

        for (std::size_t j = 0; j < d; ++j) model.components(j, comp) = v[j];
        model.eigenvalues[comp] = eigenvalue;
        found.push_back(v);
    }
    return model;
}

inline Dataset pca_transform(const PcaModel& model, const Dataset& ds) {
    if (ds.dim() != model.mean.size())
        throw std::invalid_argument("pca_transform: width mismatch");
    Dataset out;
    out.features = Matrix(ds.size(), model.components.cols);
    for (std::size_t r = 0; r < ds.size(); ++r)
        for (std::size_t c = 0; c < model.components.cols; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < ds.dim(); ++j)
                acc += (ds.features(r, j) - model.mean[j]) * model.components(j, c);
            out.features(r, c) = acc;
        }
    out.labels = ds.labels;
    out.num_classes = ds.num_classes;
    out.split_tag = ds.split_tag;
    return out;
}

/// Symmetric uniform quantization per weight block for inference:
/// delta = max|w| / (2^(bits-1) - 1), each weight replaced by
/// round(w / delta) * delta. bits = 32 is the identity, as is an all-zero
/// block. Masks are untouched.
inline SparseNetwork quantize(const SparseNetwork& net, const QuantSpec& spec) {
    spec.validate();
    if (spec.bits == 32) return net;
    SparseNetwork out = net;
    const double levels = static_cast<double>((1 << (spec.bits - 1)) - 1);
    for (auto& b : out.blocks) {
        if (!b.allocated()) continue;
        double maxabs = 0.0;
        for (double v : b.w.data) maxabs = std::max(maxabs, std::abs(v));
        if (maxabs == 0.0) continue;
        const double delta = maxabs / levels;
        for (double& v : b.w.data) v = std::round(v / delta) * delta;
    }
    return out;
}

/// Loads an externally reduced dataset triple (CSV with a `label` column).
/// Widths must agree across the three files; when expected row counts are
/// supplied they must match the original splits.
inline DatasetTriple load_precomputed(const std::string& path_train,
                                      const std::string& path_val,
                                      const std::string& path_test,
                                      std::optional<std::array<std::size_t, 3>> expected_rows =
                                          std::nullopt,
                                      const std::string& label_column = "label") {
    RawTable train_raw = read_labeled_csv(path_train, label_column);
    RawTable val_raw = read_labeled_csv(path_val, label_column);
    RawTable test_raw = read_labeled_csv(path_test, label_column);
    if (val_raw.features.cols != train_raw.features.cols ||
        test_raw.features.cols != train_raw.features.cols)
        throw std::runtime_error("load_precomputed: width mismatch across splits");
    if (expected_rows) {
        const auto& exp = *expected_rows;
        if (train_raw.features.rows != exp[0] || val_raw.features.rows != exp[1] ||
            test_raw.features.rows != exp[2])
            throw std::runtime_error("load_precomputed: row counts do not match original splits");
    }
    return finalize_splits(std::move(train_raw), std::move(val_raw), std::move(test_raw));
}

}  // namespace nnsynth
