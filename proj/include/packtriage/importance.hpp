#ifndef PACKTRIAGE_IMPORTANCE_HPP
#define PACKTRIAGE_IMPORTANCE_HPP

#include "packtriage/cart.hpp"

#include <functional>
#include <string>
#include <vector>

namespace packtriage {

/// Importance of one internal node: w*g minus the children's weighted
/// impurities, with w the raw sample count.
struct NodeImportance {
    std::size_t node_id = 0;
    double value = 0.0;
};

struct FeatureScore {
    std::string feature_id;
    double score = 0.0;
    int rank = 0; // 1-based, descending score
};

struct ImportanceReport {
    std::string method; // "impurity" or "permutation"
    std::string model_desc;
    std::vector<FeatureScore> scores; // one per catalog feature, catalog order
    std::uint64_t rng_seed = 0;       // permutation only
    int repeats = 0;                  // permutation only
};

/// One entry per internal node, in node order.
std::vector<NodeImportance> node_importances(const DecisionTree& tree);
std::vector<NodeImportance> node_importances(const GradientTree& tree);

/// Per tree, a feature's score is the sum of importances of nodes splitting
/// on it over the sum across all internal nodes, then normalized to sum 1.
/// Ensembles average the per-tree normalized scores; boosted models average
/// over every constituent tree. Trees without any split are skipped.
ImportanceReport impurity_importance(const DecisionTree& tree);
ImportanceReport impurity_importance(const EnsembleModel& model);

/// Predicted class id for a feature vector.
using PredictClassFn = std::function<int(const FeatureVector&)>;

/// Baseline accuracy on ds minus accuracy with one feature column shuffled,
/// averaged over `repeats` seeded permutations. Scores may be negative and
/// are reported as-is. `ds` should be data held out from training. Each
/// (feature, repeat) pair derives its own seed, so the per-feature loop
/// parallelizes without changing results.
ImportanceReport permutation_importance(const PredictClassFn& predict,
                                        const std::string& model_desc,
                                        const Dataset& ds, int repeats = 5,
                                        std::uint64_t rng_seed = 0);
ImportanceReport permutation_importance(const DecisionTree& tree, const Dataset& ds,
                                        int repeats = 5, std::uint64_t rng_seed = 0);
ImportanceReport permutation_importance(const EnsembleModel& model, const Dataset& ds,
                                        int repeats = 5, std::uint64_t rng_seed = 0);

/// The k highest-scoring feature ids in descending score order (the whole
/// catalog when it has fewer than k). Ties keep the report's order, which
/// is catalog order for reports produced by this library.
std::vector<std::string> select_top_k(const ImportanceReport& report, std::size_t k = 20);

/// Argmax with lowest-index tie-break; shared by everything that turns a
/// distribution into a class id.
int argmax_class(std::span<const double> distribution);

} // namespace packtriage

#endif
