// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file dataset.hpp Labeled datasets, CSV ingestion, normalization, splits,
/// and the built-in Gaussian-blob generator used by the bundled benchmarks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nnsynth/common.hpp"
#include "nnsynth/matrix.hpp"

namespace nnsynth {

struct Dataset {
    Matrix features;              // N x d
    std::vector<int> labels;      // class indices in [0, num_classes)
    int num_classes = 0;
    std::string split_tag;        // "train", "validation", "test"
    std::vector<std::string> feature_names;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }

    void validate() const {
        if (features.rows == 0) throw std::invalid_argument("dataset: empty");
        if (labels.size() != features.rows)
            throw std::invalid_argument("dataset: label count != row count");
        for (int y : labels)
            if (y < 0 || y >= num_classes)
                throw std::invalid_argument("dataset: label out of range");
        for (double v : features.data)
            if (!std::isfinite(v))
                throw std::invalid_argument("dataset: non-finite feature value");
    }
};

struct DatasetTriple {
    Dataset train, val, test;
};

/// Raw CSV contents before label mapping: feature matrix plus the label
/// column as doubles.
struct RawTable {
    Matrix features;
    std::vector<double> raw_labels;
    std::vector<std::string> feature_names;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_numeric(const std::string& cell, std::size_t line_no,
                            const std::string& col) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("csv: non-numeric cell '" + cell + "' in column '" +
                                 col + "' at line " + std::to_string(line_no));
    }
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size())
        throw std::runtime_error("csv: non-numeric cell '" + cell + "' in column '" +
                                 col + "' at line " + std::to_string(line_no));
    return v;
}

}  // namespace detail

/// Reads a UTF-8 CSV with a header row. The label column is located by name;
/// every other column becomes a feature, in header order.
inline RawTable read_labeled_csv(const std::string& path,
                                 const std::string& label_column = "label") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    std::ptrdiff_t label_idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_idx = static_cast<std::ptrdiff_t>(i);
    if (label_idx < 0)
        throw std::runtime_error("csv: missing label column '" + label_column + "' in " + path);

    RawTable table;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (static_cast<std::ptrdiff_t>(i) != label_idx)
            table.feature_names.push_back(header[i]);

    const std::size_t d = header.size() - 1;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("csv: row width mismatch at line " +
                                     std::to_string(line_no) + " in " + path);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const double v = detail::parse_numeric(cells[i], line_no, header[i]);
            if (static_cast<std::ptrdiff_t>(i) == label_idx)
                table.raw_labels.push_back(v);
            else
                values.push_back(v);
        }
    }
    table.features.rows = table.raw_labels.size();
    table.features.cols = d;
    table.features.data = std::move(values);
    if (table.features.rows == 0) throw std::runtime_error("csv: no data rows in " + path);
    return table;
}

inline void write_labeled_csv(const Dataset& ds, const std::string& path,
                              const std::string& label_column = "label") {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    out.precision(17);
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        if (!ds.feature_names.empty())
            out << ds.feature_names[j];
        else
            out << "f" << j;
        out << ',';
    }
    out << label_column << '\n';
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t j = 0; j < ds.dim(); ++j) out << ds.features(r, j) << ',';
        out << ds.labels[r] << '\n';
    }
}

/// Maps raw label values to contiguous class indices. The mapping is defined
/// by the distinct values of the training split in ascending order; a value
/// appearing only in validation or test is an error.
inline DatasetTriple finalize_splits(RawTable train_raw, RawTable val_raw, RawTable test_raw) {
    std::map<double, int> label_map;
    for (double v : train_raw.raw_labels) label_map.emplace(v, 0);
    int next = 0;
    for (auto& [value, idx] : label_map) idx = next++;

    auto build = [&](RawTable& raw, const char* tag) {
        Dataset ds;
        ds.features = std::move(raw.features);
        ds.feature_names = std::move(raw.feature_names);
        ds.num_classes = static_cast<int>(label_map.size());
        ds.split_tag = tag;
        ds.labels.reserve(raw.raw_labels.size());
        for (double v : raw.raw_labels) {
            auto it = label_map.find(v);
            if (it == label_map.end())
                throw std::runtime_error(std::string("split '") + tag +
                                         "' contains a class absent from the training split");
            ds.labels.push_back(it->second);
        }
        ds.validate();
        return ds;
    };

    DatasetTriple triple;
    triple.train = build(train_raw, "train");
    triple.val = build(val_raw, "validation");
    triple.test = build(test_raw, "test");
    if (triple.val.dim() != triple.train.dim() || triple.test.dim() != triple.train.dim())
        throw std::runtime_error("splits disagree on feature width");
    return triple;
}

struct ZScoreStats {
    std::vector<double> mean;
    std::vector<double> sd;
};

/// Per-feature statistics from the training split only.
inline ZScoreStats zscore_fit(const Dataset& train) {
    const std::size_t n = train.size(), d = train.dim();
    ZScoreStats st;
    st.mean.assign(d, 0.0);
    st.sd.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) st.mean[j] += train.features(r, j);
    for (double& m : st.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) {
            const double dlt = train.features(r, j) - st.mean[j];
            st.sd[j] += dlt * dlt;
        }
    for (double& s : st.sd) s = std::sqrt(s / static_cast<double>(n));
    return st;
}

/// Constant features get centered but not scaled.
inline void zscore_apply(Dataset& ds, const ZScoreStats& st) {
    if (ds.dim() != st.mean.size())
        throw std::invalid_argument("zscore_apply: width mismatch");
    for (std::size_t r = 0; r < ds.size(); ++r)
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            double v = ds.features(r, j) - st.mean[j];
            if (st.sd[j] > 0.0) v /= st.sd[j];
            ds.features(r, j) = v;
        }
}

/// Seeded shuffle split. Counts are floor(n * fraction) for train and
/// validation; the remainder goes to test, so 0.7/0.15/0.15 of 1000 rows
/// gives exactly 700/150/150.
inline DatasetTriple fractional_split(const RawTable& table, double train_frac,
                                      double val_frac, double test_frac,
                                      std::uint64_t seed) {
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("fractional_split: fractions must sum to 1");
    const std::size_t n = table.features.rows;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.index(i)]);

    const std::size_t n_train = static_cast<std::size_t>(std::floor(train_frac * n));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(val_frac * n));

    auto take = [&](std::size_t begin, std::size_t count) {
        RawTable part;
        part.feature_names = table.feature_names;
        part.features = Matrix(count, table.features.cols);
        part.raw_labels.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t src = order[begin + i];
            for (std::size_t j = 0; j < table.features.cols; ++j)
                part.features(i, j) = table.features(src, j);
            part.raw_labels[i] = table.raw_labels[src];
        }
        return part;
    };

    return finalize_splits(take(0, n_train), take(n_train, n_val),
                           take(n_train + n_val, n - n_train - n_val));
}

/// Seeded Gaussian blobs: one spherical cluster per class, centers drawn
/// from N(0, center_scale²) per coordinate, unit within-class noise. Rows are
/// generated class-round-robin so every split keeps all classes.
inline RawTable make_blobs(std::size_t dim, int classes, std::size_t rows,
                           std::uint64_t seed, double center_scale = 1.5) {
    if (dim == 0 || classes < 1 || rows == 0)
        throw std::invalid_argument("make_blobs: degenerate shape");
    Rng rng(derive_seed(seed, "blobs"));
    Matrix centers(static_cast<std::size_t>(classes), dim);
    for (double& v : centers.data) v = rng.normal(0.0, center_scale);

    RawTable table;
    table.features = Matrix(rows, dim);
    table.raw_labels.resize(rows);
    for (std::size_t j = 0; j < dim; ++j)
        table.feature_names.push_back("f" + std::to_string(j));
    for (std::size_t r = 0; r < rows; ++r) {
        const int cls = static_cast<int>(r % static_cast<std::size_t>(classes));
        for (std::size_t j = 0; j < dim; ++j)
            table.features(r, j) = centers(static_cast<std::size_t>(cls), j) + rng.normal();
        table.raw_labels[r] = cls;
    }
    return table;
}

inline std::uint64_t fingerprint(const DatasetTriple& t) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Dataset* ds : {&t.train, &t.val, &t.test}) {
        h = fnv1a(ds->features.data.data(), ds->features.data.size() * sizeof(double), h);
        h = fnv1a(ds->labels.data(), ds->labels.size() * sizeof(int), h);
    }
    return h;
}

}  // namespace nnsynth
