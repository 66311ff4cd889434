#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "packtriage/cart.hpp"
#include "packtriage/errors.hpp"
#include "packtriage/importance.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <numeric>

using namespace packtriage;
using testsupport::worked_example_dataset;

namespace {

TreeParams ordinal_params() {
    TreeParams params;
    params.categorical_policy = CategoricalPolicy::OrdinalPrefix;
    return params;
}

std::map<std::string, double> score_map(const ImportanceReport& report) {
    std::map<std::string, double> out;
    for (const auto& fs : report.scores) out[fs.feature_id] = fs.score;
    return out;
}

double report_sum(const ImportanceReport& report) {
    double s = 0;
    for (const auto& fs : report.scores) s += fs.score;
    return s;
}

} // namespace

TEST_CASE("node importances of the worked-example tree") {
    const Dataset ds = worked_example_dataset();
    const DecisionTree tree = build_tree(ds, ordinal_params());
    const auto importances = node_importances(tree);
    REQUIRE(importances.size() == 5);

    // exact values from hand-derived fractions; the total telescopes to the
    // root's weighted impurity because every leaf is pure
    std::vector<double> values;
    double total = 0;
    for (const auto& ni : importances) {
        values.push_back(ni.value);
        total += ni.value;
    }
    std::sort(values.begin(), values.end());
    CHECK(values[0] == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
    CHECK(values[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(values[2] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(values[3] == doctest::Approx(16.0 / 9.0).epsilon(1e-12));
    CHECK(values[4] == doctest::Approx(676.0 / 315.0).epsilon(1e-12));
    CHECK(total == doctest::Approx(48.0 / 7.0).epsilon(1e-12));

    // the two published reference figures that exact arithmetic confirms
    CHECK(values[4] == doctest::Approx(2.146).epsilon(1e-3));
    CHECK(values[0] == doctest::Approx(0.600).epsilon(1e-3));

    // root importance is the first entry (node 0)
    CHECK(importances[0].node_id == 0);
    CHECK(importances[0].value == doctest::Approx(676.0 / 315.0).epsilon(1e-12));
}

TEST_CASE("node importance of a node with two pure children is w times g") {
    Dataset ds;
    ds.catalog.entries.push_back({"x", FeatureKind::Numeric, {}});
    ds.class_names = {"a", "b"};
    for (int i = 0; i < 10; ++i) {
        ds.rows.push_back({{double(i)}});
        ds.labels.push_back(i < 4 ? 0 : 1);
    }
    const DecisionTree tree = build_tree(ds);
    const auto importances = node_importances(tree);
    REQUIRE(importances.size() == 1);
    const auto counts = std::vector<std::size_t>{4, 6};
    CHECK(importances[0].value ==
          doctest::Approx(10.0 * gini_impurity(counts)).epsilon(1e-12));
}

TEST_CASE("impurity importance of the worked-example tree") {
    const Dataset ds = worked_example_dataset();
    const DecisionTree tree = build_tree(ds, ordinal_params());
    const auto scores = score_map(impurity_importance(tree));

    CHECK(scores.at("entropy_eps") == doctest::Approx(749.0 / 2160.0).epsilon(1e-12));
    CHECK(scores.at("entropy_text") == doctest::Approx(7.0 / 36.0).epsilon(1e-12));
    CHECK(scores.at("num_standard_sections") ==
          doctest::Approx(7.0 / 48.0).epsilon(1e-12));
    CHECK(scores.at("zero_raw_size") == doctest::Approx(169.0 / 540.0).epsilon(1e-12));

    double total = 0;
    for (const auto& [id, s] : scores) total += s;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("impurity importance satisfies its structural properties") {
    SUBCASE("a stump gives its single feature the whole score") {
        const Dataset ds = testsupport::threshold_rule_dataset(100, 3);
        TreeParams params;
        params.max_depth = 1;
        const DecisionTree stump = build_tree(ds, params);
        const auto scores = score_map(impurity_importance(stump));
        CHECK(scores.at("signal") == 1.0);
        CHECK(scores.at("noise") == 0.0);
    }
    SUBCASE("ensemble of identical trees scores like one tree") {
        const Dataset ds = testsupport::threshold_rule_dataset(120, 4);
        const DecisionTree tree = build_tree(ds);
        const EnsembleModel forest = train_random_forest(ds, 5, TreeParams{}, false);
        const auto single = score_map(impurity_importance(tree));
        const auto averaged = score_map(impurity_importance(forest));
        for (const auto& [id, s] : single)
            CHECK(averaged.at(id) == doctest::Approx(s).epsilon(1e-12));
    }
    SUBCASE("scores sum to one for every model family") {
        const Dataset ds = testsupport::threshold_rule_dataset(150, 5);
        TreeParams params;
        params.rng_seed = 1;
        CHECK(report_sum(impurity_importance(build_tree(ds, params))) ==
              doctest::Approx(1.0).epsilon(1e-9));
        params.features_per_node = FeatureSampling::Sqrt;
        CHECK(report_sum(impurity_importance(train_random_forest(ds, 30, params))) ==
              doctest::Approx(1.0).epsilon(1e-9));
        CHECK(report_sum(impurity_importance(train_extra_trees(ds, 30, params))) ==
              doctest::Approx(1.0).epsilon(1e-9));
        BoostParams boost;
        boost.rounds = 20;
        CHECK(report_sum(impurity_importance(train_boosted(ds, boost))) ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("a feature no tree splits on scores exactly zero") {
        Dataset ds = testsupport::threshold_rule_dataset(100, 6);
        // an extra constant column can never be split on
        ds.catalog.entries.push_back({"constant", FeatureKind::Numeric, {}});
        for (auto& row : ds.rows) row.values.push_back(3.25);
        const auto scores = score_map(impurity_importance(build_tree(ds)));
        CHECK(scores.at("constant") == 0.0);
    }
}

TEST_CASE("permutation importance") {
    const Dataset train = testsupport::planted_signal_dataset(300, 7);
    const Dataset heldout = testsupport::planted_signal_dataset(150, 8);
    TreeParams params;
    params.rng_seed = 11;
    params.features_per_node = FeatureSampling::Sqrt;
    const EnsembleModel forest = train_random_forest(train, 30, params);

    SUBCASE("signal outranks noise") {
        const auto report = permutation_importance(forest, heldout, 5, 1);
        const auto scores = score_map(report);
        CHECK(scores.at("signal") > scores.at("noise"));
        CHECK(scores.at("signal") > 0.2);
    }
    SUBCASE("identical seeds give identical reports") {
        const auto a = permutation_importance(forest, heldout, 5, 123);
        const auto b = permutation_importance(forest, heldout, 5, 123);
        REQUIRE(a.scores.size() == b.scores.size());
        for (std::size_t i = 0; i < a.scores.size(); ++i) {
            CHECK(a.scores[i].feature_id == b.scores[i].feature_id);
            CHECK(a.scores[i].score == b.scores[i].score);
            CHECK(a.scores[i].rank == b.scores[i].rank);
        }
    }
    SUBCASE("constant column scores exactly zero") {
        Dataset train2 = train;
        Dataset held2 = heldout;
        train2.catalog.entries.push_back({"constant", FeatureKind::Numeric, {}});
        held2.catalog.entries.push_back({"constant", FeatureKind::Numeric, {}});
        for (auto& row : train2.rows) row.values.push_back(1.0);
        for (auto& row : held2.rows) row.values.push_back(1.0);
        const EnsembleModel model = train_random_forest(train2, 10, params);
        const auto scores = score_map(permutation_importance(model, held2, 5, 2));
        CHECK(scores.at("constant") == 0.0);
    }
    SUBCASE("a feature the model never reads scores zero for every seed") {
        // depth-1 stump on the signal column ignores noise entirely
        TreeParams stump_params;
        stump_params.max_depth = 1;
        const DecisionTree stump = build_tree(train, stump_params);
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            const auto scores = score_map(permutation_importance(stump, heldout, 3, seed));
            CHECK(scores.at("noise") == 0.0);
        }
    }
    SUBCASE("empty dataset throws") {
        Dataset empty;
        empty.catalog = train.catalog;
        empty.class_names = train.class_names;
        CHECK_THROWS_AS(permutation_importance(forest, empty, 5, 0), TrainError);
    }
}

TEST_CASE("select_top_k") {
    const Dataset ds = worked_example_dataset();
    const DecisionTree tree = build_tree(ds, ordinal_params());
    const auto report = impurity_importance(tree);

    SUBCASE("k of two picks the two heaviest features in order") {
        const auto top = select_top_k(report, 2);
        REQUIRE(top.size() == 2);
        CHECK(top[0] == "entropy_eps");
        CHECK(top[1] == "zero_raw_size");
    }
    SUBCASE("k beyond the catalog returns everything") {
        const auto top = select_top_k(report, 20);
        CHECK(top.size() == ds.n_features());
    }
    SUBCASE("idempotent and order-stable for distinct scores") {
        const auto once = select_top_k(report, 3);
        ImportanceReport shuffled = report;
        std::reverse(shuffled.scores.begin(), shuffled.scores.end());
        const auto again = select_top_k(shuffled, 3);
        CHECK(once == again);
    }
    SUBCASE("ranks are a permutation") {
        std::vector<int> ranks;
        for (const auto& fs : report.scores) ranks.push_back(fs.rank);
        std::sort(ranks.begin(), ranks.end());
        for (std::size_t i = 0; i < ranks.size(); ++i) CHECK(ranks[i] == int(i) + 1);
    }
}
