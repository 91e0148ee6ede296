// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file search_space.hpp Hyperparameter grid declaration and the mapping
/// between grid-index genes and concrete candidate configurations.
///
/// The canonical FFNN layout is fixed:
///   [0]            number of hidden layers
///   [1..max_depth] neurons per layer, one slot per potential layer
///   [n-3]          dimensionality-reduction method id (1-11)
///   [n-2]          dimensionality-reduction ratio
///   [n-1]          quantization bin (1-4 -> 4/8/16/32 bits)
/// Slots beyond the decoded layer count stay in the gene but are inert, which
/// keeps the predictor's feature vector a fixed length.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnsynth/common.hpp"
#include "nnsynth/dimreduce.hpp"

namespace nnsynth {

enum class ParamKind { integer, real, categorical };

struct HyperParam {
    std::string name;
    double lower = 0.0;
    double upper = 0.0;
    double step = 1.0;
    ParamKind kind = ParamKind::real;

    void validate() const {
        if (upper < lower) throw std::invalid_argument("hyperparam '" + name + "': upper < lower");
        if (step <= 0.0) throw std::invalid_argument("hyperparam '" + name + "': step must be > 0");
    }

    /// Number of grid points. A small slack absorbs decimal steps such as
    /// 0.1 whose quotient lands just below an integer.
    std::size_t grid_size() const {
        return static_cast<std::size_t>(std::floor((upper - lower) / step + 1e-6)) + 1;
    }

    double value_at(std::size_t index) const {
        if (index >= grid_size())
            throw std::invalid_argument("hyperparam '" + name + "': index out of range");
        double v = lower + static_cast<double>(index) * step;
        if (kind != ParamKind::real) v = std::round(v);
        return v;
    }

    /// Grid index of an on-grid value; off-grid values are an error.
    std::size_t index_of(double value) const {
        const double x = (value - lower) / step;
        const double r = std::round(x);
        if (std::abs(x - r) > 1e-6 || r < -0.5 || static_cast<std::size_t>(r) >= grid_size())
            throw std::invalid_argument("hyperparam '" + name + "': value " +
                                        std::to_string(value) + " is off-grid");
        return static_cast<std::size_t>(r);
    }
};

struct ArchitectureGene {
    std::vector<std::uint32_t> indices;

    bool operator==(const ArchitectureGene& other) const { return indices == other.indices; }
    bool operator<(const ArchitectureGene& other) const { return indices < other.indices; }

    std::uint64_t hash() const {
        return fnv1a(indices.data(), indices.size() * sizeof(std::uint32_t));
    }
};

struct SearchSpace {
    std::vector<HyperParam> params;

    std::size_t gene_length() const { return params.size(); }
    std::size_t max_depth() const {
        if (params.size() < 5)
            throw std::logic_error("search space: canonical layout needs >= 5 params");
        return params.size() - 4;
    }

    void validate() const {
        if (params.empty()) throw std::invalid_argument("search space: no hyperparameters");
        for (const auto& p : params) p.validate();
    }

    bool gene_valid(const ArchitectureGene& gene) const {
        if (gene.indices.size() != params.size()) return false;
        for (std::size_t i = 0; i < params.size(); ++i)
            if (gene.indices[i] >= params[i].grid_size()) return false;
        return true;
    }

    void require_valid(const ArchitectureGene& gene) const {
        if (!gene_valid(gene)) throw std::invalid_argument("gene invalid for search space");
    }

    /// Total number of genes; saturates at uint64 max on overflow.
    std::uint64_t total_grid_size() const {
        std::uint64_t total = 1;
        for (const auto& p : params) {
            const std::uint64_t g = p.grid_size();
            if (total > UINT64_MAX / g) return UINT64_MAX;
            total *= g;
        }
        return total;
    }

    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& p : params) {
            h = fnv1a(p.name, h);
            h = fnv1a(&p.lower, sizeof p.lower, h);
            h = fnv1a(&p.upper, sizeof p.upper, h);
            h = fnv1a(&p.step, sizeof p.step, h);
            const int k = static_cast<int>(p.kind);
            h = fnv1a(&k, sizeof k, h);
        }
        return h;
    }
};

/// The general FFNN space: 1-6 hidden layers, 50-600 neurons per layer in
/// steps of 25, 11 dimensionality-reduction methods, compression ratio 1-20
/// in steps of 0.1, and four quantization bins.
inline SearchSpace ffnn_default_space() {
    SearchSpace s;
    s.params.push_back({"layers", 1, 6, 1, ParamKind::integer});
    for (int i = 1; i <= 6; ++i)
        s.params.push_back({"neurons" + std::to_string(i), 50, 600, 25, ParamKind::integer});
    s.params.push_back({"dr_method", 1, 11, 1, ParamKind::categorical});
    s.params.push_back({"dr_ratio", 1, 20, 0.1, ParamKind::real});
    s.params.push_back({"quant", 1, 4, 1, ParamKind::categorical});
    return s;
}

struct CandidateConfig {
    int hidden_layers = 1;
    std::vector<int> neurons;        // length hidden_layers
    std::vector<int> neuron_slots;   // all slots, inert tail included
    DrConfig dr;
    QuantSpec quant;
    Connectivity connectivity = Connectivity::dense_adjacent;
    int dr_method_id = 0;            // raw 1-11 grid value
};

namespace detail {

inline DrMethod dr_method_from_id(int id) {
    switch (id) {
        case 1: return DrMethod::rp_gauss_scaled;
        case 2: return DrMethod::rp_gauss_unit;
        case 3: return DrMethod::rp_sign;
        case 4: return DrMethod::rp_sparse;
        case 5: return DrMethod::pca;
        default: break;
    }
    if (id >= 6 && id <= 11) return DrMethod::precomputed;
    throw std::invalid_argument("dr method id out of range: " + std::to_string(id));
}

inline int quant_bits_from_bin(int bin) {
    switch (bin) {
        case 1: return 4;
        case 2: return 8;
        case 3: return 16;
        case 4: return 32;
        default: throw std::invalid_argument("quantization bin out of range");
    }
}

inline int quant_bin_from_bits(int bits) {
    switch (bits) {
        case 4: return 1;
        case 8: return 2;
        case 16: return 3;
        case 32: return 4;
        default: throw std::invalid_argument("quantization bits out of range");
    }
}

}  // namespace detail

inline CandidateConfig decode(const SearchSpace& space, const ArchitectureGene& gene) {
    space.require_valid(gene);
    const std::size_t depth_slots = space.max_depth();
    CandidateConfig cfg;
    cfg.hidden_layers = static_cast<int>(space.params[0].value_at(gene.indices[0]));
    for (std::size_t i = 0; i < depth_slots; ++i)
        cfg.neuron_slots.push_back(
            static_cast<int>(space.params[1 + i].value_at(gene.indices[1 + i])));
    cfg.neurons.assign(cfg.neuron_slots.begin(),
                       cfg.neuron_slots.begin() + cfg.hidden_layers);
    const std::size_t base = 1 + depth_slots;
    cfg.dr_method_id = static_cast<int>(space.params[base].value_at(gene.indices[base]));
    cfg.dr.method = detail::dr_method_from_id(cfg.dr_method_id);
    cfg.dr.ratio = space.params[base + 1].value_at(gene.indices[base + 1]);
    cfg.quant.bits = detail::quant_bits_from_bin(
        static_cast<int>(space.params[base + 2].value_at(gene.indices[base + 2])));
    return cfg;
}

/// Inverse of decode. Inert neuron slots are taken from `neuron_slots` when
/// present; otherwise they collapse to the grid's lower bound.
inline ArchitectureGene encode(const SearchSpace& space, const CandidateConfig& cfg) {
    space.validate();
    const std::size_t depth_slots = space.max_depth();
    if (cfg.neurons.size() != static_cast<std::size_t>(cfg.hidden_layers))
        throw std::invalid_argument("encode: neurons list length != hidden_layers");
    ArchitectureGene gene;
    gene.indices.push_back(
        static_cast<std::uint32_t>(space.params[0].index_of(cfg.hidden_layers)));
    for (std::size_t i = 0; i < depth_slots; ++i) {
        double v;
        if (i < cfg.neurons.size())
            v = cfg.neurons[i];
        else if (i < cfg.neuron_slots.size())
            v = cfg.neuron_slots[i];
        else
            v = space.params[1 + i].lower;
        gene.indices.push_back(static_cast<std::uint32_t>(space.params[1 + i].index_of(v)));
    }
    const std::size_t base = 1 + depth_slots;
    gene.indices.push_back(
        static_cast<std::uint32_t>(space.params[base].index_of(cfg.dr_method_id)));
    gene.indices.push_back(
        static_cast<std::uint32_t>(space.params[base + 1].index_of(cfg.dr.ratio)));
    gene.indices.push_back(static_cast<std::uint32_t>(
        space.params[base + 2].index_of(detail::quant_bin_from_bits(cfg.quant.bits))));
    return gene;
}

struct SpaceOverride {
    std::string name;
    double lower;
    double upper;
    double step;  // <= 0 keeps the original step
};

/// Narrows a space per dataset. Overrides may only tighten: bounds must stay
/// inside the original range and remain on the original grid, and a new step
/// must be a positive multiple of the original.
inline SearchSpace restrict_space(const SearchSpace& space,
                                  const std::vector<SpaceOverride>& overrides) {
    SearchSpace out = space;
    for (const auto& ov : overrides) {
        HyperParam* target = nullptr;
        for (auto& p : out.params)
            if (p.name == ov.name) target = &p;
        if (!target) throw std::invalid_argument("restrict: unknown hyperparameter " + ov.name);
        const HyperParam original = *target;
        if (ov.lower < original.lower - 1e-9 || ov.upper > original.upper + 1e-9)
            throw std::invalid_argument("restrict: override widens a bound on " + ov.name);
        if (ov.upper < ov.lower)
            throw std::invalid_argument("restrict: upper < lower on " + ov.name);
        const double step = ov.step > 0.0 ? ov.step : original.step;
        const double mult = step / original.step;
        if (std::abs(mult - std::round(mult)) > 1e-6 || mult < 1.0 - 1e-9)
            throw std::invalid_argument("restrict: step must be a multiple of the original on " +
                                        ov.name);
        original.index_of(ov.lower);  // must stay on the original grid
        target->lower = ov.lower;
        target->upper = ov.upper;
        target->step = step;
        target->validate();
    }
    return out;
}

inline nlohmann::json space_to_json(const SearchSpace& space) {
    nlohmann::json doc;
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : space.params) {
        const char* kind = p.kind == ParamKind::integer
                               ? "integer"
                               : (p.kind == ParamKind::real ? "real" : "categorical");
        params.push_back({{"name", p.name},
                          {"lower", p.lower},
                          {"upper", p.upper},
                          {"step", p.step},
                          {"kind", kind}});
    }
    doc["params"] = params;
    return doc;
}

inline SearchSpace space_from_json(const nlohmann::json& doc) {
    SearchSpace space;
    for (const auto& jp : doc.at("params")) {
        HyperParam p;
        p.name = jp.at("name").get<std::string>();
        p.lower = jp.at("lower").get<double>();
        p.upper = jp.at("upper").get<double>();
        p.step = jp.at("step").get<double>();
        const std::string kind = jp.at("kind").get<std::string>();
        if (kind == "integer")
            p.kind = ParamKind::integer;
        else if (kind == "real")
            p.kind = ParamKind::real;
        else if (kind == "categorical")
            p.kind = ParamKind::categorical;
        else
            throw std::invalid_argument("space: unknown kind " + kind);
        space.params.push_back(p);
    }
    space.validate();
    return space;
}

}  // namespace nnsynth
