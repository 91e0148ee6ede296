// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file sobol.hpp Sobol low-discrepancy sequence (base-2, Gray-code
/// construction) used to seed the architecture pool. Direction numbers for
/// dimensions 2-32 are embedded as primitive-polynomial / initial-value rows;
/// dimension 1 is the van der Corput sequence.

#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "nnsynth/search_space.hpp"

namespace nnsynth {

inline constexpr int kSobolMaxDimension = 32;
inline constexpr int kSobolBits = 32;

namespace sobol_detail {

struct DirectionRow {
    int s;                      // degree of the primitive polynomial
    std::uint32_t a;            // inner coefficients a_1..a_{s-1}, a_1 is the MSB
    std::array<std::uint32_t, 7> m;  // initial values m_1..m_s (odd, m_i < 2^i)
};

/// Rows for dimensions 2..32.
inline constexpr DirectionRow kDirections[31] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
    {7, 7, {1, 1, 3, 13, 7, 35, 63}},
    {7, 8, {1, 1, 5, 9, 1, 25, 53}},
    {7, 14, {1, 1, 1, 13, 9, 35, 107}},
    {7, 19, {1, 1, 5, 11, 27, 19, 113}},
    {7, 21, {1, 3, 5, 3, 19, 53, 51}},
    {7, 28, {1, 3, 1, 3, 13, 17, 51}},
    {7, 31, {1, 1, 5, 1, 3, 15, 19}},
    {7, 32, {1, 3, 3, 9, 25, 25, 101}},
    {7, 37, {1, 1, 5, 3, 15, 43, 111}},
    {7, 41, {1, 3, 5, 13, 31, 9, 7}},
    {7, 42, {1, 1, 7, 7, 3, 29, 51}},
};

/// Expands one dimension's direction integers v_1..v_32 (already shifted so
/// bit k lives at position 32-k).
inline std::array<std::uint32_t, kSobolBits> direction_integers(int dim) {
    std::array<std::uint32_t, kSobolBits> v{};
    if (dim == 1) {
        for (int k = 1; k <= kSobolBits; ++k)
            v[k - 1] = 1u << (kSobolBits - k);
        return v;
    }
    const DirectionRow& row = kDirections[dim - 2];
    const int s = row.s;
    std::array<std::uint32_t, kSobolBits + 1> m{};
    for (int i = 1; i <= s; ++i) m[i] = row.m[i - 1];
    for (int k = s + 1; k <= kSobolBits; ++k) {
        m[k] = m[k - s] ^ (m[k - s] << s);
        for (int i = 1; i <= s - 1; ++i)
            if ((row.a >> (s - 1 - i)) & 1u) m[k] ^= m[k - i] << i;
    }
    for (int k = 1; k <= kSobolBits; ++k)
        v[k - 1] = m[k] << (kSobolBits - k);
    return v;
}

inline int count_trailing_zero_bits(std::uint64_t x) {
    int n = 0;
    while ((x & 1u) == 0) {
        x >>= 1;
        ++n;
    }
    return n;
}

// --- GF(2) polynomial helpers used to self-check the embedded table ---

inline std::uint32_t gf2_mulmod(std::uint32_t a, std::uint32_t b, std::uint32_t mod, int deg) {
    std::uint32_t r = 0;
    while (b) {
        if (b & 1u) r ^= a;
        b >>= 1;
        a <<= 1;
        if (a & (1u << deg)) a ^= mod;
    }
    return r;
}

/// True when the row's polynomial x^s + a_1 x^{s-1} + ... + a_{s-1} x + 1 is
/// primitive over GF(2): x generates the full multiplicative group of order
/// 2^s - 1.
inline bool row_polynomial_primitive(const DirectionRow& row) {
    const int s = row.s;
    const std::uint32_t poly = (1u << s) | (row.a << 1) | 1u;
    const std::uint32_t group_order = (1u << s) - 1;
    std::uint32_t p = 1;
    for (std::uint32_t e = 1; e <= group_order; ++e) {
        p = gf2_mulmod(p, 2, poly, s);  // multiply by x
        if (p == 1) return e == group_order;
    }
    return false;
}

inline bool row_initial_values_valid(const DirectionRow& row) {
    for (int i = 1; i <= row.s; ++i) {
        const std::uint32_t mi = row.m[i - 1];
        if (mi % 2 == 0 || mi >= (1u << i)) return false;
    }
    return true;
}

}  // namespace sobol_detail

/// Incremental Sobol generator positioned at an arbitrary start index.
class SobolSequence {
public:
    SobolSequence(int dimension, std::uint64_t start_index = 0) : dimension_(dimension) {
        if (dimension < 1 || dimension > kSobolMaxDimension)
            throw std::invalid_argument("sobol: dimension outside the direction-number table");
        v_.reserve(static_cast<std::size_t>(dimension));
        for (int d = 1; d <= dimension; ++d)
            v_.push_back(sobol_detail::direction_integers(d));
        x_.assign(static_cast<std::size_t>(dimension), 0);
        index_ = start_index;
        const std::uint64_t gray = start_index ^ (start_index >> 1);
        for (int bit = 0; bit < 63; ++bit)
            if ((gray >> bit) & 1u)
                for (int d = 0; d < dimension; ++d) x_[d] ^= v_[d][bit];
    }

    /// Emits the point at the current index and advances.
    std::vector<double> next() {
        std::vector<double> point(static_cast<std::size_t>(dimension_));
        for (int d = 0; d < dimension_; ++d)
            point[d] = static_cast<double>(x_[d]) * 0x1.0p-32;
        const int flip = sobol_detail::count_trailing_zero_bits(index_ + 1);
        for (int d = 0; d < dimension_; ++d) x_[d] ^= v_[d][flip];
        ++index_;
        return point;
    }

    std::uint64_t index() const { return index_; }

private:
    int dimension_;
    std::uint64_t index_ = 0;
    std::vector<std::array<std::uint32_t, kSobolBits>> v_;
    std::vector<std::uint32_t> x_;
};

/// `count` consecutive Sobol points starting at sequence index `skip`.
inline std::vector<std::vector<double>> sobol_points(int dimension, std::size_t count,
                                                     std::uint64_t skip = 1) {
    SobolSequence seq(dimension, skip);
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(seq.next());
    return out;
}

struct PoolResult {
    std::vector<ArchitectureGene> genes;
    bool full_enumeration = false;  // grid smaller than the request
    bool truncated = false;         // draw budget exhausted before `count` distinct genes
};

/// Architecture pool seeded from the Sobol sequence. Coordinates map to grid
/// indices by floor(u * grid_size); duplicates are discarded and replaced by
/// continuing the sequence, up to a draw budget of 16 * count. A space with
/// fewer total genes than requested yields its full enumeration, flagged.
inline PoolResult pool_from_sobol(const SearchSpace& space, std::size_t count,
                                  std::uint64_t skip = 1) {
    if (count < 1) throw std::invalid_argument("pool_from_sobol: count must be >= 1");
    space.validate();
    PoolResult result;

    if (space.total_grid_size() < count) {
        result.full_enumeration = true;
        ArchitectureGene gene;
        gene.indices.assign(space.gene_length(), 0);
        for (;;) {
            result.genes.push_back(gene);
            std::size_t pos = space.gene_length();
            while (pos > 0) {
                --pos;
                if (++gene.indices[pos] < space.params[pos].grid_size()) break;
                gene.indices[pos] = 0;
                if (pos == 0) return result;
            }
        }
    }

    SobolSequence seq(static_cast<int>(space.gene_length()), skip);
    std::set<std::vector<std::uint32_t>> seen;
    const std::size_t budget = 16 * count;
    for (std::size_t draw = 0; draw < budget && result.genes.size() < count; ++draw) {
        const auto point = seq.next();
        ArchitectureGene gene;
        gene.indices.reserve(space.gene_length());
        for (std::size_t i = 0; i < space.gene_length(); ++i) {
            const std::size_t grid = space.params[i].grid_size();
            auto idx = static_cast<std::size_t>(point[i] * static_cast<double>(grid));
            if (idx >= grid) idx = grid - 1;
            gene.indices.push_back(static_cast<std::uint32_t>(idx));
        }
        if (seen.insert(gene.indices).second) result.genes.push_back(std::move(gene));
    }
    result.truncated = result.genes.size() < count;
    return result;
}

/// Structural self-check of the embedded table; exposed for the test suite.
inline bool sobol_direction_table_valid() {
    for (const auto& row : sobol_detail::kDirections)
        if (!sobol_detail::row_polynomial_primitive(row) ||
            !sobol_detail::row_initial_values_valid(row))
            return false;
    return true;
}

}  // namespace nnsynth
