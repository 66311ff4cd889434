#include "packtriage/importance.hpp"

#include "packtriage/errors.hpp"
#include "packtriage/parallel.hpp"
#include "packtriage/rng.hpp"

#include <algorithm>
#include <numeric>

namespace packtriage {

namespace {

// Accumulates the node-importance sum per feature and the grand total.
// Binary gini/variance splits never lose impurity, so total > 0 iff the
// tree carries any usable split.
struct TreeTotals {
    std::vector<double> per_feature;
    double total = 0.0;

    bool has_splits() const { return total > 0.0; }
};

template <class Tree>
TreeTotals tree_totals(const Tree& tree, std::size_t n_features) {
    TreeTotals t;
    t.per_feature.assign(n_features, 0.0);
    for (const auto& ni : node_importances(tree)) {
        const auto& node = tree.nodes[ni.node_id];
        t.per_feature[node.split->feature_index] += ni.value;
        t.total += ni.value;
    }
    return t;
}

std::vector<double> normalized_scores(const TreeTotals& t) {
    std::vector<double> scores(t.per_feature.size(), 0.0);
    if (t.total == 0.0) return scores;
    for (std::size_t f = 0; f < scores.size(); ++f)
        scores[f] = t.per_feature[f] / t.total;
    const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
    if (sum > 0)
        for (double& s : scores) s /= sum;
    return scores;
}

void assign_ranks(ImportanceReport& report) {
    std::vector<std::size_t> order(report.scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return report.scores[a].score > report.scores[b].score;
    });
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        report.scores[order[pos]].rank = static_cast<int>(pos) + 1;
}

ImportanceReport make_report(const FeatureCatalog& catalog, std::string method,
                             std::string desc, const std::vector<double>& scores) {
    ImportanceReport report;
    report.method = std::move(method);
    report.model_desc = std::move(desc);
    report.scores.reserve(catalog.size());
    for (std::size_t f = 0; f < catalog.size(); ++f)
        report.scores.push_back({catalog.entries[f].id, scores[f], 0});
    assign_ranks(report);
    return report;
}

template <class Node>
std::vector<NodeImportance> node_importances_impl(const std::vector<Node>& nodes) {
    std::vector<NodeImportance> out;
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        const auto& node = nodes[id];
        if (node.is_leaf()) continue;
        const auto& left = nodes[node.left];
        const auto& right = nodes[node.right];
        const double value = double(node.sample_count) * node.impurity -
                             double(left.sample_count) * left.impurity -
                             double(right.sample_count) * right.impurity;
        out.push_back({id, value});
    }
    return out;
}

} // namespace

std::vector<NodeImportance> node_importances(const DecisionTree& tree) {
    return node_importances_impl(tree.nodes);
}

std::vector<NodeImportance> node_importances(const GradientTree& tree) {
    return node_importances_impl(tree.nodes);
}

ImportanceReport impurity_importance(const DecisionTree& tree) {
    const auto scores = normalized_scores(tree_totals(tree, tree.catalog.size()));
    return make_report(tree.catalog, "impurity", "decision_tree", scores);
}

ImportanceReport impurity_importance(const EnsembleModel& model) {
    const std::size_t n_features = model.catalog.size();
    std::vector<double> mean(n_features, 0.0);
    std::size_t used = 0;

    auto accumulate_tree = [&](const auto& tree) {
        const auto totals = tree_totals(tree, n_features);
        if (!totals.has_splits()) return;
        const auto scores = normalized_scores(totals);
        for (std::size_t f = 0; f < n_features; ++f) mean[f] += scores[f];
        ++used;
    };

    if (model.kind == EnsembleKind::Boosted) {
        for (const auto& layer : model.boosted.rounds)
            for (const auto& tree : layer) accumulate_tree(tree);
    } else {
        for (const auto& tree : model.trees) accumulate_tree(tree);
    }
    if (used > 0)
        for (double& v : mean) v /= double(used);

    const char* desc = model.kind == EnsembleKind::RandomForest ? "random_forest"
                       : model.kind == EnsembleKind::ExtraTrees ? "extra_trees"
                                                                : "boosted";
    return make_report(model.catalog, "impurity", desc, mean);
}

ImportanceReport permutation_importance(const PredictClassFn& predict,
                                        const std::string& model_desc,
                                        const Dataset& ds, int repeats,
                                        std::uint64_t rng_seed) {
    if (ds.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset,
                         "permutation importance needs a nonempty dataset");

    const std::size_t n = ds.n_rows();
    std::vector<int> base_pred(n);
    parallel_for(n, [&](std::size_t i) { base_pred[i] = predict(ds.rows[i]); });
    std::size_t base_hits = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (base_pred[i] == ds.labels[i]) ++base_hits;
    const double baseline = double(base_hits) / double(n);

    std::vector<double> scores(ds.n_features(), 0.0);
    parallel_for(ds.n_features(), [&](std::size_t f) {
        double drop_sum = 0;
        std::vector<std::size_t> perm(n);
        FeatureVector scratch;
        for (int rep = 0; rep < repeats; ++rep) {
            Rng rng(mix_seed(mix_seed(rng_seed, f), std::uint64_t(rep)));
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng.shuffle(perm);
            std::size_t hits = 0;
            for (std::size_t i = 0; i < n; ++i) {
                scratch = ds.rows[i];
                scratch.values[f] = ds.rows[perm[i]].values[f];
                if (predict(scratch) == ds.labels[i]) ++hits;
            }
            drop_sum += baseline - double(hits) / double(n);
        }
        scores[f] = repeats > 0 ? drop_sum / double(repeats) : 0.0;
    });

    auto report = make_report(ds.catalog, "permutation", model_desc, scores);
    report.rng_seed = rng_seed;
    report.repeats = repeats;
    return report;
}

ImportanceReport permutation_importance(const DecisionTree& tree, const Dataset& ds,
                                        int repeats, std::uint64_t rng_seed) {
    return permutation_importance(
        [&tree](const FeatureVector& x) { return argmax_class(predict_tree(tree, x)); },
        "decision_tree", ds, repeats, rng_seed);
}

ImportanceReport permutation_importance(const EnsembleModel& model, const Dataset& ds,
                                        int repeats, std::uint64_t rng_seed) {
    const char* desc = model.kind == EnsembleKind::RandomForest ? "random_forest"
                       : model.kind == EnsembleKind::ExtraTrees ? "extra_trees"
                                                                : "boosted";
    return permutation_importance(
        [&model](const FeatureVector& x) {
            return argmax_class(predict_ensemble(model, x));
        },
        desc, ds, repeats, rng_seed);
}

std::vector<std::string> select_top_k(const ImportanceReport& report, std::size_t k) {
    std::vector<std::size_t> order(report.scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return report.scores[a].score > report.scores[b].score;
    });
    if (k < order.size()) order.resize(k);
    std::vector<std::string> ids;
    ids.reserve(order.size());
    for (std::size_t i : order) ids.push_back(report.scores[i].feature_id);
    return ids;
}

int argmax_class(std::span<const double> distribution) {
    int best = 0;
    for (std::size_t i = 1; i < distribution.size(); ++i)
        if (distribution[i] > distribution[best]) best = static_cast<int>(i);
    return best;
}

} // namespace packtriage
