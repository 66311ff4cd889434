#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "packtriage/entropy.hpp"
#include "packtriage/importance.hpp"
#include "packtriage/parallel.hpp"
#include "packtriage/pipeline.hpp"

#include "corpus.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <filesystem>

using namespace packtriage;

namespace {

// Runs the body once in serial mode and once with every core, returning
// both results for bitwise comparison.
template <class F>
auto serial_vs_parallel(F&& body) {
    const int saved = max_threads();
    set_max_threads(1);
    auto serial = body();
    set_max_threads(0);
    auto parallel = body();
    set_max_threads(saved);
    return std::make_pair(std::move(serial), std::move(parallel));
}

} // namespace

TEST_CASE("entropy histogram is thread-count independent") {
    std::vector<std::uint8_t> big(12 << 20);
    Rng rng(404);
    for (auto& b : big) b = rng.next_byte();

    const auto [serial, parallel] =
        serial_vs_parallel([&] { return shannon_entropy(big); });
    CHECK(serial == parallel);
    CHECK(serial == shannon_entropy_serial(big));
}

TEST_CASE("forest training is thread-count independent") {
    const Dataset ds = testsupport::threshold_rule_dataset(400, 91);
    TreeParams params;
    params.rng_seed = 17;
    params.features_per_node = FeatureSampling::Sqrt;

    const auto [serial, parallel] = serial_vs_parallel([&] {
        ModelArtifact artifact;
        ClassifierSpec spec;
        spec.kind = ClassifierKind::RandomForest;
        spec.n_trees = 24;
        spec.tree_params = params;
        artifact.model = train(spec, ds, {"signal", "noise"});
        return render_model(artifact);
    });
    CHECK(serial == parallel);
}

TEST_CASE("extra trees and boosting are thread-count independent") {
    const Dataset ds = testsupport::threshold_rule_dataset(300, 92);
    SUBCASE("extra trees") {
        TreeParams params;
        params.rng_seed = 23;
        params.features_per_node = FeatureSampling::Sqrt;
        const auto [serial, parallel] = serial_vs_parallel([&] {
            ModelArtifact artifact;
            ClassifierSpec spec;
            spec.kind = ClassifierKind::ExtraTrees;
            spec.n_trees = 16;
            spec.tree_params = params;
            artifact.model = train(spec, ds, {"signal", "noise"});
            return render_model(artifact);
        });
        CHECK(serial == parallel);
    }
    SUBCASE("boosted") {
        const auto [serial, parallel] = serial_vs_parallel([&] {
            ModelArtifact artifact;
            ClassifierSpec spec;
            spec.kind = ClassifierKind::Boosted;
            spec.boost_params.rounds = 12;
            artifact.model = train(spec, ds, {"signal", "noise"});
            return render_model(artifact);
        });
        CHECK(serial == parallel);
    }
}

TEST_CASE("permutation importance is thread-count independent") {
    const Dataset train_ds = testsupport::planted_signal_dataset(250, 93);
    const Dataset heldout = testsupport::planted_signal_dataset(120, 94);
    TreeParams params;
    params.rng_seed = 31;
    const EnsembleModel forest = train_random_forest(train_ds, 12, params);

    const auto [serial, parallel] = serial_vs_parallel(
        [&] { return render_selection(permutation_importance(forest, heldout, 5, 7)); });
    CHECK(serial == parallel);
}

TEST_CASE("the full pipeline renders identically at any thread count") {
    const SignatureDb db = testsupport::extended_userdb();
    const auto corpus = testsupport::make_corpus(10, 314);
    const auto paths = testsupport::write_corpus("parallel_corpus_tmp", corpus);

    PipelineConfig cfg;
    cfg.labeling.signature_db = &db;
    cfg.rng_seed = 8;
    cfg.permutation_repeats = 2;
    cfg.selection_sources = {{ClassifierKind::DecisionTree, ImportanceMethod::Impurity},
                             {ClassifierKind::RandomForest, ImportanceMethod::Permutation}};
    cfg.classifier_specs.resize(2);
    cfg.classifier_specs[0].kind = ClassifierKind::DecisionTree;
    cfg.classifier_specs[1].kind = ClassifierKind::RandomForest;
    cfg.classifier_specs[1].n_trees = 10;

    const auto [serial, parallel] =
        serial_vs_parallel([&] { return render_report(run_pipeline(paths, cfg)); });
    CHECK(serial == parallel);

    std::filesystem::remove_all("parallel_corpus_tmp");
}
