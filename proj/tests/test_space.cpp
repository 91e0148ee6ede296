// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <gtest/gtest.h>

#include "nnsynth/search_space.hpp"

namespace nnsynth {
namespace {

TEST(SearchSpace, DefaultGridShapesMatchTheGeneralSpace) {
    const SearchSpace s = ffnn_default_space();
    ASSERT_EQ(s.gene_length(), 10u);
    EXPECT_EQ(s.params[0].grid_size(), 6u);    // 1-6 layers
    for (int i = 1; i <= 6; ++i) EXPECT_EQ(s.params[i].grid_size(), 23u);  // 50-600 step 25
    EXPECT_EQ(s.params[7].grid_size(), 11u);   // dr method 1-11
    EXPECT_EQ(s.params[8].grid_size(), 191u);  // ratio 1-20 step 0.1
    EXPECT_EQ(s.params[9].grid_size(), 4u);    // quant bins
    EXPECT_EQ(s.max_depth(), 6u);
}

TEST(Decode, AllZeroGeneHitsLowerBounds) {
    const SearchSpace s = ffnn_default_space();
    ArchitectureGene gene;
    gene.indices.assign(10, 0);
    const CandidateConfig cfg = decode(s, gene);
    EXPECT_EQ(cfg.hidden_layers, 1);
    ASSERT_EQ(cfg.neurons.size(), 1u);
    EXPECT_EQ(cfg.neurons[0], 50);
    EXPECT_EQ(cfg.dr_method_id, 1);
    EXPECT_EQ(cfg.dr.method, DrMethod::rp_gauss_scaled);
    EXPECT_DOUBLE_EQ(cfg.dr.ratio, 1.0);
    EXPECT_EQ(cfg.quant.bits, 4);
}

TEST(Decode, MaxIndexGeneHitsUpperBounds) {
    const SearchSpace s = ffnn_default_space();
    ArchitectureGene gene;
    for (const auto& p : s.params)
        gene.indices.push_back(static_cast<std::uint32_t>(p.grid_size() - 1));
    const CandidateConfig cfg = decode(s, gene);
    EXPECT_EQ(cfg.hidden_layers, 6);
    ASSERT_EQ(cfg.neurons.size(), 6u);
    for (int n : cfg.neurons) EXPECT_EQ(n, 600);
    EXPECT_EQ(cfg.dr_method_id, 11);
    EXPECT_EQ(cfg.dr.method, DrMethod::precomputed);
    EXPECT_NEAR(cfg.dr.ratio, 20.0, 1e-9);
    EXPECT_EQ(cfg.quant.bits, 32);
}

TEST(Decode, RejectsOutOfRangeIndices) {
    const SearchSpace s = ffnn_default_space();
    ArchitectureGene gene;
    gene.indices.assign(10, 0);
    gene.indices[0] = 6;  // grid size is 6, max index 5
    EXPECT_THROW(decode(s, gene), std::invalid_argument);
}

TEST(EncodeDecode, RoundTripsOnRandomGenes) {
    const SearchSpace s = ffnn_default_space();
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        ArchitectureGene gene;
        for (const auto& p : s.params)
            gene.indices.push_back(static_cast<std::uint32_t>(rng.index(p.grid_size())));
        const CandidateConfig cfg = decode(s, gene);
        const ArchitectureGene back = encode(s, cfg);
        EXPECT_EQ(back.indices, gene.indices);
    }
}

TEST(EncodeDecode, DecodeOfEncodeIsIdentityOnConfigs) {
    const SearchSpace s = ffnn_default_space();
    CandidateConfig cfg;
    cfg.hidden_layers = 3;
    cfg.neurons = {100, 275, 600};
    cfg.dr_method_id = 5;
    cfg.dr.method = DrMethod::pca;
    cfg.dr.ratio = 2.5;
    cfg.quant.bits = 8;
    const ArchitectureGene gene = encode(s, cfg);
    const CandidateConfig round = decode(s, gene);
    EXPECT_EQ(round.hidden_layers, cfg.hidden_layers);
    EXPECT_EQ(round.neurons, cfg.neurons);
    EXPECT_EQ(round.dr_method_id, cfg.dr_method_id);
    EXPECT_NEAR(round.dr.ratio, cfg.dr.ratio, 1e-9);
    EXPECT_EQ(round.quant.bits, cfg.quant.bits);
}

TEST(Encode, KnownIndexArithmetic) {
    const SearchSpace s = ffnn_default_space();
    CandidateConfig cfg;
    cfg.hidden_layers = 3;
    cfg.neurons = {50, 50, 50};
    cfg.dr_method_id = 1;
    cfg.dr.ratio = 2.5;  // (2.5 - 1.0) / 0.1 = 15
    cfg.quant.bits = 4;
    const ArchitectureGene gene = encode(s, cfg);
    EXPECT_EQ(gene.indices[0], 2u);   // layers 3 -> index 2
    EXPECT_EQ(gene.indices[8], 15u);  // ratio slot
}

TEST(Encode, OffGridValueIsAnError) {
    const SearchSpace s = ffnn_default_space();
    CandidateConfig cfg;
    cfg.hidden_layers = 1;
    cfg.neurons = {50};
    cfg.dr_method_id = 1;
    cfg.dr.ratio = 2.55;  // not a multiple of 0.1 from 1.0
    cfg.quant.bits = 4;
    EXPECT_THROW(encode(s, cfg), std::invalid_argument);
}

TEST(Decode, ValuesAreOnGrid) {
    const SearchSpace s = ffnn_default_space();
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        ArchitectureGene gene;
        for (const auto& p : s.params)
            gene.indices.push_back(static_cast<std::uint32_t>(rng.index(p.grid_size())));
        const CandidateConfig cfg = decode(s, gene);
        const auto& ratio_param = s.params[8];
        const double steps = (cfg.dr.ratio - ratio_param.lower) / ratio_param.step;
        EXPECT_NEAR(steps, std::round(steps), 1e-9);
        EXPECT_GE(cfg.dr.ratio, ratio_param.lower);
        EXPECT_LE(cfg.dr.ratio, ratio_param.upper + 1e-9);
    }
}

TEST(Restrict, TightenedRatioShrinksTheGrid) {
    const SearchSpace s = ffnn_default_space();
    const SearchSpace r = restrict_space(s, {{"dr_ratio", 1.0, 6.0, 0.0}});
    EXPECT_EQ(r.params[8].grid_size(), 51u);  // (6 - 1) / 0.1 + 1
    EXPECT_EQ(r.params[0].grid_size(), 6u);   // untouched rows keep their grids
}

TEST(Restrict, EmptyOverridesKeepTheSpaceIdentical) {
    const SearchSpace s = ffnn_default_space();
    const SearchSpace r = restrict_space(s, {});
    EXPECT_EQ(r.hash(), s.hash());
}

TEST(Restrict, WideningIsAnError) {
    const SearchSpace s = ffnn_default_space();
    EXPECT_THROW(restrict_space(s, {{"dr_ratio", 1.0, 25.0, 0.0}}), std::invalid_argument);
    EXPECT_THROW(restrict_space(s, {{"layers", 0.0, 6.0, 0.0}}), std::invalid_argument);
}

TEST(Restrict, InvertedBoundsAreAnError) {
    const SearchSpace s = ffnn_default_space();
    EXPECT_THROW(restrict_space(s, {{"dr_ratio", 6.0, 2.0, 0.0}}), std::invalid_argument);
}

TEST(Restrict, GenesRemainEncodableWhenStillInRange) {
    const SearchSpace s = ffnn_default_space();
    const SearchSpace r = restrict_space(s, {{"dr_ratio", 1.0, 6.0, 0.0}});
    CandidateConfig cfg;
    cfg.hidden_layers = 2;
    cfg.neurons = {75, 125};
    cfg.dr_method_id = 3;
    cfg.dr.ratio = 4.2;
    cfg.quant.bits = 16;
    const auto in_old = encode(s, cfg);
    const auto in_new = encode(r, cfg);
    EXPECT_EQ(decode(r, in_new).dr.ratio, decode(s, in_old).dr.ratio);
}

TEST(SpaceJson, RoundTrips) {
    const SearchSpace s = ffnn_default_space();
    const SearchSpace back = space_from_json(space_to_json(s));
    EXPECT_EQ(back.hash(), s.hash());
}

TEST(SpaceJson, ShippedGeneralSpaceFileMatchesTheBuiltInDefault) {
    std::ifstream in(std::string(NNSYNTH_SOURCE_DIR) + "/configs/space-general-ffnn.json");
    ASSERT_TRUE(in);
    nlohmann::json doc;
    in >> doc;
    const SearchSpace shipped = space_from_json(doc);
    EXPECT_EQ(shipped.hash(), ffnn_default_space().hash());
}

TEST(HyperParam, GridArithmeticSurvivesDecimalSteps) {
    const HyperParam p{"ratio", 1.0, 20.0, 0.1, ParamKind::real};
    EXPECT_EQ(p.grid_size(), 191u);
    EXPECT_NEAR(p.value_at(190), 20.0, 1e-9);
    EXPECT_EQ(p.index_of(20.0), 190u);
    EXPECT_EQ(p.index_of(1.0), 0u);
}

}  // namespace
}  // namespace nnsynth
