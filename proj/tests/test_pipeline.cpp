#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "packtriage/entropy.hpp"
#include "packtriage/errors.hpp"
#include "packtriage/pipeline.hpp"

#include "corpus.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using namespace packtriage;

namespace {

Dataset three_class_dataset(std::size_t a, std::size_t b, std::size_t c,
                            std::uint64_t seed) {
    Dataset ds;
    ds.catalog.entries.push_back({"x", FeatureKind::Numeric, {}});
    ds.class_names = {"c0", "c1", "c2"};
    Rng rng(seed);
    auto add = [&](std::size_t count, int label) {
        for (std::size_t i = 0; i < count; ++i) {
            ds.rows.push_back({{rng.uniform_double() + 3.0 * label}});
            ds.labels.push_back(label);
        }
    };
    add(a, 0);
    add(b, 1);
    add(c, 2);
    return ds;
}

PipelineConfig small_pipeline_config(const SignatureDb* db) {
    PipelineConfig cfg;
    cfg.labeling.signature_db = db;
    cfg.selection_sources = {{ClassifierKind::DecisionTree, ImportanceMethod::Impurity}};
    cfg.classifier_specs.clear();
    ClassifierSpec tree;
    tree.kind = ClassifierKind::DecisionTree;
    cfg.classifier_specs.push_back(tree);
    ClassifierSpec knn;
    knn.kind = ClassifierKind::Knn;
    cfg.classifier_specs.push_back(knn);
    cfg.permutation_repeats = 2;
    return cfg;
}

} // namespace

TEST_CASE("stratified split") {
    SUBCASE("per-class train counts stay within one row of the ratio") {
        const Dataset ds = three_class_dataset(875, 260, 1005, 5);
        const auto idx = split_indices(ds.labels, 3, 0.70, 42);
        std::array<std::size_t, 3> train_counts{};
        for (std::size_t r : idx.train) ++train_counts[ds.labels[r]];
        CHECK(std::abs(double(train_counts[0]) - 0.7 * 875.0) <= 1.0);
        CHECK(std::abs(double(train_counts[1]) - 0.7 * 260.0) <= 1.0);
        CHECK(std::abs(double(train_counts[2]) - 0.7 * 1005.0) <= 1.0);
        CHECK(idx.train.size() + idx.test.size() == ds.n_rows());
    }
    SUBCASE("two rows of one class split one and one at ratio one half") {
        std::vector<int> labels = {0, 0};
        const auto idx = split_indices(labels, 1, 0.5, 7);
        CHECK(idx.train.size() == 1);
        CHECK(idx.test.size() == 1);
    }
    SUBCASE("a single-row class lands in test") {
        std::vector<int> labels = {0, 0, 0, 0, 1};
        const auto idx = split_indices(labels, 2, 0.7, 7);
        std::size_t ones_in_test = 0;
        for (std::size_t r : idx.test) ones_in_test += labels[r] == 1 ? 1 : 0;
        CHECK(ones_in_test == 1);
    }
    SUBCASE("same seed, same partition; disjoint and complete") {
        const Dataset ds = three_class_dataset(40, 30, 20, 9);
        const auto a = split_indices(ds.labels, 3, 0.7, 123);
        const auto b = split_indices(ds.labels, 3, 0.7, 123);
        CHECK(a.train == b.train);
        CHECK(a.test == b.test);
        std::set<std::size_t> seen(a.train.begin(), a.train.end());
        for (std::size_t r : a.test) CHECK(seen.insert(r).second);
        CHECK(seen.size() == ds.n_rows());
    }
    SUBCASE("empty input throws") {
        CHECK_THROWS_AS(split_indices({}, 2, 0.7, 1), TrainError);
    }
}

TEST_CASE("synthetic builder examples") {
    SUBCASE("single zero-filled section parses with zero entropy") {
        SyntheticPeSpec spec;
        spec.sections.push_back({".text", 512, 0x60000020, SectionContent::zero_fill()});
        spec.entry = {".text", 0, false};
        const PeFile pe = parse_pe(build_synthetic_pe(spec));
        CHECK(pe.num_sections == 1);
        CHECK(shannon_entropy(pe.section_raw_bytes(pe.sections[0])) == 0.0);
    }
    SUBCASE("planted UPX bytes are identified against the sample db") {
        SyntheticPeSpec spec;
        spec.sections.push_back(
            {".text", 512, 0x60000020,
             SectionContent::literal(
                 {0x60, 0xE8, 0x00, 0x00, 0x00, 0x00, 0x58, 0x83, 0xE8, 0x3D})});
        spec.entry = {".text", 0, false};
        const PeFile pe = parse_pe(build_synthetic_pe(spec));
        const SignatureDb db = testsupport::sample_userdb();
        const MatchResult match = identify_packer(pe, db);
        REQUIRE(match.matched());
        CHECK(*match.packer_name == "UPX 0.50 - 0.70");
    }
    SUBCASE("out-of-range entry labels as custom packed") {
        SyntheticPeSpec spec;
        spec.sections.push_back({".text", 512, 0x60000020, SectionContent::repeat(0x90)});
        spec.entry = {"", 0, true};
        const SignatureDb db = testsupport::sample_userdb();
        LabelingConfig cfg;
        cfg.signature_db = &db;
        CHECK(label_file(parse_pe(build_synthetic_pe(spec)), cfg) ==
              PackLabel::CustomPacked);
    }
    SUBCASE("invalid descriptions are rejected") {
        SyntheticPeSpec spec;
        spec.sections.push_back(
            {"waytoolongname", 512, 0x60000020, SectionContent::zero_fill()});
        spec.entry = {"waytoolongname", 0, false};
        CHECK_THROWS_AS(build_synthetic_pe(spec), SynthError);

        SyntheticPeSpec missing;
        missing.sections.push_back({".text", 512, 0x60000020, SectionContent::zero_fill()});
        missing.entry = {"nosuch", 0, false};
        CHECK_THROWS_AS(build_synthetic_pe(missing), SynthError);

        SyntheticPeSpec imports;
        imports.import_symbols = 5; // no DLLs to hold them
        CHECK_THROWS_AS(build_synthetic_pe(imports), SynthError);
    }
}

TEST_CASE("model artifacts round trip") {
    const Dataset ds = testsupport::threshold_rule_dataset(200, 77);

    for (ClassifierKind kind :
         {ClassifierKind::DecisionTree, ClassifierKind::RandomForest,
          ClassifierKind::ExtraTrees, ClassifierKind::Boosted, ClassifierKind::Knn,
          ClassifierKind::GaussianNb, ClassifierKind::LogisticRegression}) {
        CAPTURE(classifier_kind_name(kind));
        ClassifierSpec spec;
        spec.kind = kind;
        spec.n_trees = 8;
        spec.boost_params.rounds = 6;
        spec.logreg_iterations = 40;
        spec.tree_params.rng_seed = 5;

        ModelArtifact artifact;
        artifact.model = train(spec, ds, {"signal", "noise"});
        artifact.seed = 5;
        artifact.trained_rows = ds.n_rows();

        const ModelArtifact loaded = parse_model(render_model(artifact));
        Rng rng(321);
        for (int probe = 0; probe < 100; ++probe) {
            FeatureVector x{{rng.uniform_double(), rng.uniform_double()}};
            const auto a = predict_proba(artifact.model, x);
            const auto b = predict_proba(loaded.model, x);
            REQUIRE(a.size() == b.size());
            for (std::size_t c = 0; c < a.size(); ++c) CHECK(a[c] == b[c]);
        }
    }
}

TEST_CASE("artifact error paths") {
    const Dataset ds = testsupport::threshold_rule_dataset(50, 78);
    ClassifierSpec spec;
    ModelArtifact artifact;
    artifact.model = train(spec, ds, {"signal"});
    const std::string text = render_model(artifact);

    SUBCASE("truncated text is corrupt") {
        try {
            parse_model(text.substr(0, text.size() / 2));
            FAIL("expected ArtifactError");
        } catch (const ArtifactError& e) {
            CHECK(e.code == ArtifactError::Code::Corrupt);
        }
    }
    SUBCASE("future version tag mismatches") {
        std::string future = text;
        future.replace(0, std::string("packtriage/1").size(), "packtriage/2");
        try {
            parse_model(future);
            FAIL("expected ArtifactError");
        } catch (const ArtifactError& e) {
            CHECK(e.code == ArtifactError::Code::VersionMismatch);
        }
    }
    SUBCASE("non-artifact text is corrupt") {
        CHECK_THROWS_AS(parse_model("hello world\n"), ArtifactError);
    }
    SUBCASE("save and load through a file") {
        const std::string path = "artifact_tmp.model";
        save_model(artifact, path);
        const ModelArtifact loaded = load_model(path);
        CHECK(predict_proba(loaded.model, ds.rows[0]) ==
              predict_proba(artifact.model, ds.rows[0]));
        std::filesystem::remove(path);
    }
}

TEST_CASE("selection report round trip") {
    const Dataset ds = testsupport::threshold_rule_dataset(100, 79);
    const auto report = impurity_importance(build_tree(ds));
    const std::string path = "selection_tmp.txt";
    save_selection(report, path);
    const ImportanceReport loaded = load_selection(path);
    CHECK(loaded.method == report.method);
    REQUIRE(loaded.scores.size() == report.scores.size());
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        CHECK(loaded.scores[i].feature_id == report.scores[i].feature_id);
        CHECK(loaded.scores[i].score == report.scores[i].score);
        CHECK(loaded.scores[i].rank == report.scores[i].rank);
    }
    std::filesystem::remove(path);
}

TEST_CASE("extract_corpus and run_pipeline on a small synthetic corpus") {
    const SignatureDb db = testsupport::extended_userdb();
    const auto corpus = testsupport::make_corpus(14, 2024);
    const auto paths = testsupport::write_corpus("pipeline_corpus_tmp", corpus);

    PipelineConfig cfg = small_pipeline_config(&db);
    cfg.rng_seed = 11;

    const CorpusExtraction extraction =
        extract_corpus(paths, default_catalog(), cfg.labeling);
    CHECK(extraction.errors.empty());
    REQUIRE(extraction.dataset.n_rows() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
        CHECK(extraction.dataset.labels[i] == int(corpus[i].expected));

    const RunReport report = run_pipeline(paths, cfg);

    SUBCASE("grid shape and metrics") {
        CHECK(report.grid.cells.size() == 2); // 1 selection x 2 specs
        CHECK(report.n_train + report.n_test == corpus.size());
        const auto& best = report.grid.cells[report.grid.best_index].metrics;
        CHECK(best.confusion.counts.size() == 3);
        CHECK(best.accuracy > 0.8);
    }
    SUBCASE("step 3 agrees with direct identification, file for file") {
        std::set<std::string> reported;
        for (const auto& row : report.packer_rows) {
            std::ifstream f(row.path, std::ios::binary);
            const std::vector<std::uint8_t> bytes(
                (std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
            const MatchResult direct = identify_packer(parse_pe(bytes), db);
            const std::string expected =
                direct.matched() ? *direct.packer_name : "UNKNOWN";
            CHECK(row.packer == expected);
            reported.insert(row.packer);
        }
        // every name in the frequency table exists in the db
        std::set<std::string> db_names;
        for (const auto& e : db.entries) db_names.insert(e.name);
        for (const auto& [name, count] : report.packer_counts) {
            CHECK(count > 0);
            if (name != "UNKNOWN") CHECK(db_names.count(name) == 1);
        }
    }
    SUBCASE("selection carries ranked top features") {
        REQUIRE(report.selections.size() == 1);
        CHECK(report.selections[0].top_features.size() ==
              std::min<std::size_t>(cfg.top_k, default_catalog().size()));
    }
    SUBCASE("reports are byte-identical across reruns") {
        const RunReport again = run_pipeline(paths, cfg);
        CHECK(render_report(again) == render_report(report));
    }
    SUBCASE("a different seed changes the split") {
        PipelineConfig other = cfg;
        other.rng_seed = 12;
        const RunReport report2 = run_pipeline(paths, other);
        CHECK(render_report(report2) != render_report(report));
    }

    std::filesystem::remove_all("pipeline_corpus_tmp");
}

TEST_CASE("run_pipeline accepts a bare dataset and skips step 3") {
    const Dataset ds = three_class_dataset(40, 40, 40, 13);
    PipelineConfig cfg = small_pipeline_config(nullptr);
    cfg.rng_seed = 3;
    const RunReport report = run_pipeline(ds, {}, cfg);
    CHECK(report.packer_rows.empty());
    CHECK(report.grid.cells.size() == 2);
    const std::string text = render_report(report);
    CHECK(text.starts_with("packtriage/1 report"));
    CHECK(text.find("GRID") != std::string::npos);
    CHECK(text.find("CONFUSION") != std::string::npos);
    CHECK(text.find("SELECTION") != std::string::npos);
    CHECK(text.find("PACKERS") != std::string::npos);
}

TEST_CASE("pipeline errors surface in the report") {
    namespace fs = std::filesystem;
    const SignatureDb db = testsupport::sample_userdb();
    const auto corpus = testsupport::make_corpus(6, 31);
    auto paths = testsupport::write_corpus("pipeline_err_tmp", corpus);
    {
        std::ofstream bad("pipeline_err_tmp/garbage.bin", std::ios::binary);
        bad << "not a pe";
    }
    paths.push_back("pipeline_err_tmp/garbage.bin");

    PipelineConfig cfg = small_pipeline_config(&db);
    const RunReport report = run_pipeline(paths, cfg);
    REQUIRE(report.errors.size() == 1);
    CHECK(render_report(report).find("garbage.bin") != std::string::npos);
    fs::remove_all("pipeline_err_tmp");
}
