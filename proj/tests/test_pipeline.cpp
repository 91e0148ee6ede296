// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nnsynth/pipeline.hpp"

namespace nnsynth {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    EXPECT_TRUE(in) << "missing file " << p;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("nnsynth_pipe_" + tag);
    fs::remove_all(dir);
    return dir;
}

fs::path source_path(const char* rel) { return fs::path(NNSYNTH_SOURCE_DIR) / rel; }

RunConfig mini_config() { return load_config(source_path("configs/synthetic-mini.json").string()); }

TEST(Ingest, FractionalSplitArithmetic) {
    const fs::path dir = fresh_dir("frac");
    fs::create_directories(dir);
    Dataset ds;
    ds.features = Matrix(1000, 3);
    Rng rng(1);
    for (auto& v : ds.features.data) v = rng.uniform(-1.0, 1.0);
    ds.labels.resize(1000);
    for (std::size_t i = 0; i < 1000; ++i) ds.labels[i] = static_cast<int>(i % 4);
    ds.num_classes = 4;
    write_labeled_csv(ds, (dir / "data.csv").string());

    DatasetSpec spec;
    spec.csv_path = (dir / "data.csv").string();
    spec.train_fraction = 0.7;
    spec.val_fraction = 0.15;
    spec.test_fraction = 0.15;
    const IngestResult result = ingest(spec);
    EXPECT_EQ(result.data.train.size(), 700u);
    EXPECT_EQ(result.data.val.size(), 150u);
    EXPECT_EQ(result.data.test.size(), 150u);
    EXPECT_EQ(result.data.train.dim(), 3u);
    fs::remove_all(dir);
}

TEST(Ingest, BuiltinBlobsHonorsRequestedSplitSizesExactly) {
    DatasetSpec spec;
    spec.builtin = "blobs-48-11";
    spec.rows_train = 220;
    spec.rows_val = 55;
    spec.rows_test = 55;
    const IngestResult result = ingest(spec);
    EXPECT_EQ(result.data.train.size(), 220u);
    EXPECT_EQ(result.data.val.size(), 55u);
    EXPECT_EQ(result.data.test.size(), 55u);
    EXPECT_EQ(result.data.train.dim(), 48u);
    EXPECT_EQ(result.data.train.num_classes, 11);
}

TEST(Ingest, ZScoreUsesTrainingStatisticsOnly) {
    DatasetSpec spec;
    spec.builtin = "blobs-6-3";
    spec.rows_train = 300;
    spec.rows_val = 80;
    spec.rows_test = 80;
    const IngestResult result = ingest(spec);
    for (std::size_t j = 0; j < 6; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t r = 0; r < 300; ++r) mean += result.data.train.features(r, j);
        mean /= 300.0;
        for (std::size_t r = 0; r < 300; ++r) {
            const double d = result.data.train.features(r, j) - mean;
            var += d * d;
        }
        var /= 300.0;
        EXPECT_NEAR(mean, 0.0, 1e-9);
        EXPECT_NEAR(var, 1.0, 1e-9);
    }
    // Validation columns are normalized with the training stats, so they are
    // close to but not exactly standard.
    double vmean = 0.0;
    for (std::size_t r = 0; r < 80; ++r) vmean += result.data.val.features(r, 0);
    vmean /= 80.0;
    EXPECT_NE(vmean, 0.0);
}

TEST(Ingest, ErrorsAreSpecific) {
    const fs::path dir = fresh_dir("errs");
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "nolabel.csv");
        out << "a,b\n1,2\n";
    }
    DatasetSpec spec;
    spec.csv_path = (dir / "nolabel.csv").string();
    EXPECT_THROW(ingest(spec), std::runtime_error);  // missing label column

    {
        std::ofstream out(dir / "badcell.csv");
        out << "a,label\nfoo,1\n";
    }
    spec.csv_path = (dir / "badcell.csv").string();
    EXPECT_THROW(ingest(spec), std::runtime_error);  // non-numeric cell

    {
        std::ofstream out(dir / "train.csv");
        out << "a,label\n1,0\n2,0\n3,1\n4,1\n";
        std::ofstream v(dir / "val.csv");
        v << "a,label\n1,2\n";  // class 2 absent from train
        std::ofstream t(dir / "test.csv");
        t << "a,label\n1,0\n";
    }
    DatasetSpec given;
    given.train_path = (dir / "train.csv").string();
    given.val_path = (dir / "val.csv").string();
    given.test_path = (dir / "test.csv").string();
    EXPECT_THROW(ingest(given), std::runtime_error);

    DatasetSpec unknown;
    unknown.builtin = "blobs-oops";
    EXPECT_THROW(ingest(unknown), ConfigError);
    fs::remove_all(dir);
}

TEST(Pipeline, EndToEndMiniRunCompletesAllStages) {
    const fs::path dir = fresh_dir("e2e");
    Pipeline pipeline(mini_config(), dir, 2);
    pipeline.run_all();

    for (const auto& stage : stage_order())
        EXPECT_EQ(pipeline.manifest().stages.at(stage), "done") << stage;
    EXPECT_EQ(pipeline.manifest().test_split_reads, 2);

    const auto report = pipeline.read_json("report.json");
    ASSERT_TRUE(report.contains("gs"));
    ASSERT_TRUE(report.contains("gs_ls"));
    EXPECT_FALSE(report.contains("baseline"));
    EXPECT_GE(report["gs"]["val_accuracy"].get<double>(), 0.0);
    EXPECT_LE(report["gs"]["val_accuracy"].get<double>(), 1.0);

    // Parameter counts in the report equal a recount from the serialized
    // final networks.
    const auto gs_net = network_from_json(pipeline.read_json("gs_network.json"));
    EXPECT_EQ(report["gs"]["active_params"].get<std::size_t>(), gs_net.active_weights());
    const auto ls_net = network_from_json(pipeline.read_json("ls_network.json"));
    EXPECT_EQ(report["gs_ls"]["active_params"].get<std::size_t>(), ls_net.active_weights());

    // The records ledger holds iter_count * (1 + max_iterations) rows.
    std::ifstream records(pipeline.records_path());
    std::string line;
    std::size_t rows = 0;
    std::getline(records, line);  // header
    while (std::getline(records, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 8u * 3);
    fs::remove_all(dir);
}

TEST(Pipeline, RerunOnCompletedManifestRetrainsNothingAndKeepsBytes) {
    const fs::path dir = fresh_dir("rerun");
    {
        Pipeline pipeline(mini_config(), dir, 2);
        pipeline.run_all();
    }
    const std::string report_before = slurp(dir / "report.json");
    const std::string records_before = slurp(dir / "records.csv");

    Pipeline again(mini_config(), dir, 2);
    again.run_all();
    EXPECT_EQ(again.training_calls(), 0u);
    EXPECT_EQ(slurp(dir / "report.json"), report_before);
    EXPECT_EQ(slurp(dir / "records.csv"), records_before);
    fs::remove_all(dir);
}

TEST(Pipeline, WorkerCountDoesNotChangeReportBytes) {
    const fs::path dir1 = fresh_dir("w1");
    const fs::path dir4 = fresh_dir("w4");
    {
        Pipeline pipeline(mini_config(), dir1, 1);
        pipeline.run_all();
    }
    {
        Pipeline pipeline(mini_config(), dir4, 4);
        pipeline.run_all();
    }
    EXPECT_EQ(slurp(dir1 / "report.json"), slurp(dir4 / "report.json"));
    EXPECT_EQ(slurp(dir1 / "records.csv"), slurp(dir4 / "records.csv"));
    EXPECT_EQ(slurp(dir1 / "predictor.json"), slurp(dir4 / "predictor.json"));
    fs::remove_all(dir1);
    fs::remove_all(dir4);
}

TEST(Pipeline, GlobalOnlyRunMarksLocalFieldsAbsent) {
    const fs::path dir = fresh_dir("gsonly");
    RunConfig cfg = mini_config();
    cfg.local_enabled = false;
    Pipeline pipeline(cfg, dir, 2);
    pipeline.run_all();
    EXPECT_EQ(pipeline.manifest().stages.at("local"), "skipped");
    EXPECT_EQ(pipeline.manifest().test_split_reads, 1);
    const auto report = pipeline.read_json("report.json");
    EXPECT_TRUE(report.contains("gs"));
    EXPECT_FALSE(report.contains("gs_ls"));  // absent, not zeroed
    fs::remove_all(dir);
}

TEST(Pipeline, ResumeAfterPartialSamplesReproducesThePredictor) {
    const fs::path full_dir = fresh_dir("resume_full");
    {
        Pipeline pipeline(mini_config(), full_dir, 2);
        pipeline.run_all();
    }
    const std::string predictor_full = slurp(full_dir / "predictor.json");
    const std::string records_full = slurp(full_dir / "records.csv");

    // Simulate a run that died mid-samples: a prefix of records.csv exists,
    // pool.json is present, and the samples stage is still pending.
    const fs::path resume_dir = fresh_dir("resume_part");
    {
        Pipeline pipeline(mini_config(), resume_dir, 2);
        pipeline.stage_pool();
    }
    {
        std::stringstream all(records_full);
        std::ofstream partial(resume_dir / "records.csv");
        std::string line;
        for (int i = 0; i < 13 && std::getline(all, line); ++i)
            partial << line << '\n';  // header + 12 of 24 records
    }
    Pipeline resumed(mini_config(), resume_dir, 2);
    resumed.run_all();
    EXPECT_EQ(resumed.training_calls(), 12u + 1u /* GS finalize */);
    EXPECT_EQ(slurp(resume_dir / "predictor.json"), predictor_full);
    EXPECT_EQ(slurp(resume_dir / "records.csv"), records_full);
    fs::remove_all(full_dir);
    fs::remove_all(resume_dir);
}

TEST(Pipeline, ForceStageInvalidatesDownstream) {
    const fs::path dir = fresh_dir("force");
    {
        Pipeline pipeline(mini_config(), dir, 2);
        pipeline.run_all();
    }
    Pipeline pipeline(mini_config(), dir, 2);
    pipeline.run_all({"global"});
    EXPECT_GE(pipeline.training_calls(), 1u);  // GS finalize re-ran
    EXPECT_EQ(pipeline.manifest().test_split_reads, 2);
    for (const auto& stage : stage_order())
        EXPECT_EQ(pipeline.manifest().stages.at(stage), "done");
    fs::remove_all(dir);
}

TEST(Pipeline, SchemeAGrowsFromASeedNetwork) {
    const fs::path dir = fresh_dir("schemeA");
    RunConfig cfg = mini_config();
    cfg.local.scheme = Scheme::A;
    cfg.local.op_schedule.clear();  // scheme default: grow, grow neuron, prune
    cfg.local.max_iterations = 3;
    cfg.scheme_a_seed_hidden = 6;
    Pipeline pipeline(cfg, dir, 2);
    pipeline.run_all();
    const auto report = pipeline.read_json("report.json");
    ASSERT_TRUE(report.contains("gs_ls"));
    // The local-search result descends from the [k, 6, C] seed, not from the
    // global winner's layer widths.
    const auto sizes = report["gs_ls"]["layer_sizes"].get<std::vector<std::size_t>>();
    ASSERT_EQ(sizes.size(), 3u);
    EXPECT_LE(sizes[1], 6u + 3u);  // seeded width plus at most one growth per iteration
    fs::remove_all(dir);
}

TEST(Pipeline, MismatchedRunDirectoryIsRejected) {
    const fs::path dir = fresh_dir("mismatch");
    {
        Pipeline pipeline(mini_config(), dir, 1);
        pipeline.stage_pool();
    }
    RunConfig other = mini_config();
    other.master_seed += 1;
    EXPECT_THROW(Pipeline(other, dir, 1), ConfigError);
    fs::remove_all(dir);
}

TEST(Pipeline, ReportMatchesTheCommittedGoldenFile) {
    const fs::path golden_path = source_path("tests/golden/mini_report.json");
    if (!fs::exists(golden_path))
        GTEST_SKIP() << "golden file not pinned yet";
    const fs::path dir = fresh_dir("golden");
    Pipeline pipeline(mini_config(), dir, 2);
    pipeline.run_all();
    EXPECT_EQ(slurp(dir / "report.json"), slurp(golden_path));
    fs::remove_all(dir);
}

class GeneTrainerFixture : public ::testing::Test {
protected:
    void SetUp() override {
        DatasetSpec spec;
        spec.builtin = "blobs-8-3";
        spec.rows_train = 240;
        spec.rows_val = 60;
        spec.rows_test = 60;
        spec.split_seed = 5;
        data_ = ingest(spec).data;
        space_ = load_config(source_path("configs/synthetic-mini.json").string()).space;
        trainer_.space = &space_;
        trainer_.data = &data_;
        trainer_.base_train.epochs = 10;
        trainer_.master_seed = 99;
    }

    ArchitectureGene gene_with_quant_bin(std::uint32_t bin_index) const {
        ArchitectureGene g;
        g.indices = {0, 1, 0, 0, 1, 0};  // 1 layer of 16 neurons, method 1, ratio 1.5
        g.indices.back() = bin_index;
        return g;
    }

    DatasetTriple data_;
    SearchSpace space_;
    GeneTrainer trainer_;
};

TEST_F(GeneTrainerFixture, FullPrecisionBinMatchesAnUnquantizedRun) {
    const auto gene = gene_with_quant_bin(3);  // bin 4 -> 32 bits
    int reads = 0;
    const auto out = trainer_.finalize(gene, [&] { ++reads; });
    EXPECT_EQ(reads, 1);
    const auto reduced = trainer_.reduce(out.config, true);
    EXPECT_DOUBLE_EQ(out.val_accuracy, evaluate(out.net, reduced.val));
    EXPECT_DOUBLE_EQ(out.test_accuracy, evaluate(out.net, reduced.test));
    for (std::size_t i = 0; i < out.net.blocks.size(); ++i)
        EXPECT_EQ(out.net.blocks[i].w.data, out.net_quantized.blocks[i].w.data);
}

TEST_F(GeneTrainerFixture, RepeatUnderTheSameSeedIsIdentical) {
    const auto gene = gene_with_quant_bin(1);
    const auto a = trainer_.finalize(gene);
    const auto b = trainer_.finalize(gene);
    EXPECT_EQ(a.val_accuracy, b.val_accuracy);
    EXPECT_EQ(a.test_accuracy, b.test_accuracy);
    for (std::size_t i = 0; i < a.net.blocks.size(); ++i)
        EXPECT_EQ(a.net.blocks[i].w.data, b.net.blocks[i].w.data);
}

TEST_F(GeneTrainerFixture, DivergencePropagatesWithTheGeneAttached) {
    trainer_.base_train.optimizer = Optimizer::sgd_momentum;
    trainer_.base_train.learning_rate = 1e18;
    const auto gene = gene_with_quant_bin(0);
    // As a fitness signal the failure is a zero score, not an error.
    EXPECT_DOUBLE_EQ(trainer_(gene), 0.0);
    try {
        trainer_.finalize(gene);
        FAIL() << "finalize should propagate divergence";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("gene ["), std::string::npos);
    }
}

TEST_F(GeneTrainerFixture, PrecomputedMethodsErrorWithoutAFile) {
    ArchitectureGene g;
    g.indices = {0, 1, 0, 4, 1, 0};  // dr_method id 5 on the mini space is "pca"
    // Force a precomputed method by decoding a method id in 6..11 from the
    // general space instead.
    const SearchSpace general = ffnn_default_space();
    GeneTrainer t = trainer_;
    t.space = &general;
    ArchitectureGene gg;
    gg.indices = {0, 0, 0, 0, 0, 0, 0, 6, 0, 3};  // dr_method id 7
    EXPECT_THROW(t(gg), std::runtime_error);
}

TEST(Config, UnknownFieldsAndBadValuesAreConfigErrors) {
    EXPECT_THROW(load_config("/nonexistent/path.json"), ConfigError);
    nlohmann::json doc;
    doc["dataset"] = {{"builtin", "blobs-4-2"}};
    doc["train"] = {{"optimizer", "sgd"}};  // unknown name
    EXPECT_THROW(config_from_json(doc), ConfigError);
}

TEST(Report, RenderIncludesEveryRow) {
    nlohmann::json report;
    report["gs"] = {{"val_accuracy", 0.98},  {"test_accuracy", 0.97},
                    {"active_params", 1234}, {"dr_method", "rp_sign"},
                    {"dr_ratio", 2.0},       {"quant_bits", 8}};
    report["gs_ls"] = {{"val_accuracy", 0.985},
                       {"test_accuracy", 0.975},
                       {"active_params", 500},
                       {"quant_bits", 8}};
    const std::string text = render_report(report);
    EXPECT_NE(text.find("GS"), std::string::npos);
    EXPECT_NE(text.find("GS+LS"), std::string::npos);
    EXPECT_NE(text.find("1234"), std::string::npos);
}

}  // namespace
}  // namespace nnsynth
