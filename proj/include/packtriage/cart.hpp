#ifndef PACKTRIAGE_CART_HPP
#define PACKTRIAGE_CART_HPP

#include "packtriage/features.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace packtriage {

enum class FeatureSampling { All, Sqrt };

/// How categorical features are searched for binary splits.
///  - SubsetExhaustive: every proper nonempty subset of the declared
///    categories (canonical representatives only), up to 10 categories;
///    larger features fall back to OrdinalPrefix.
///  - OrdinalPrefix: only prefixes of the declared category order, i.e. the
///    category list is treated as ordinal. This is what mainstream tree
///    libraries do to label-encoded columns.
enum class CategoricalPolicy { SubsetExhaustive, OrdinalPrefix };

struct TreeParams {
    std::size_t max_depth = 32;
    std::size_t min_samples_split = 2;
    std::size_t min_samples_leaf = 1;
    double min_impurity_decrease = 0.0;
    FeatureSampling features_per_node = FeatureSampling::All;
    std::uint64_t rng_seed = 0;
    CategoricalPolicy categorical_policy = CategoricalPolicy::SubsetExhaustive;
};

struct SplitRule {
    enum class Kind { Threshold, Subset, Boolean };

    std::size_t feature_index = 0;
    Kind kind = Kind::Threshold;
    double threshold = 0.0;         // Threshold: go left iff value <= threshold
    std::uint32_t subset_mask = 0;  // Subset: go left iff bit(category) set

    bool goes_left(double value) const {
        switch (kind) {
        case Kind::Threshold: return value <= threshold;
        case Kind::Subset: {
            const auto idx = static_cast<std::uint32_t>(value);
            return idx < 32 && (subset_mask >> idx & 1u) != 0;
        }
        case Kind::Boolean: return value == 0.0;
        }
        return false;
    }

    bool operator==(const SplitRule&) const = default;
};

struct TreeNode {
    std::size_t sample_count = 0;          // w_j
    std::vector<std::size_t> class_counts; // per class, sums to sample_count
    double impurity = 0.0;                 // gini of class_counts
    std::optional<SplitRule> split;
    int left = -1;
    int right = -1;
    std::vector<double> leaf_distribution; // leaves: class_counts / sample_count

    bool is_leaf() const { return !split.has_value(); }
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
    FeatureCatalog catalog;
    std::vector<std::string> class_names;
};

/// Regression tree fitted to boosting residuals.
struct GradientTreeNode {
    std::size_t sample_count = 0;
    double impurity = 0.0; // mean squared deviation of the targets
    std::optional<SplitRule> split;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;

    bool is_leaf() const { return !split.has_value(); }
};

struct GradientTree {
    std::vector<GradientTreeNode> nodes;
};

struct BoostParams {
    std::size_t rounds = 100;
    double learning_rate = 0.1;
    std::size_t max_depth = 6;
    std::size_t min_samples_leaf = 1;
    double l2_leaf = 1.0; // L2 on leaf values in the Newton step
    CategoricalPolicy categorical_policy = CategoricalPolicy::SubsetExhaustive;
};

enum class EnsembleKind { RandomForest, ExtraTrees, Boosted };

struct BoostedLayers {
    double learning_rate = 0.1;
    std::vector<double> base_scores;               // per class
    std::vector<std::vector<GradientTree>> rounds; // [round][class]
};

struct EnsembleModel {
    EnsembleKind kind = EnsembleKind::RandomForest;
    FeatureCatalog catalog;
    std::vector<std::string> class_names;
    std::vector<DecisionTree> trees; // forest / extra trees
    BoostedLayers boosted;           // boosted only
    TreeParams params;
};

/// 1 - sum((c_i/n)^2). Throws TrainError(EmptyNode) when all counts are zero.
double gini_impurity(std::span<const std::size_t> class_counts);

/// Diagnostic weighted impurity of a single feature over the whole dataset:
/// categorical and boolean columns partition by distinct value (multiway),
/// numeric columns by the best single threshold's two sides. Not used by
/// tree building, which is strictly binary.
double weighted_feature_gini(const Dataset& ds, std::string_view feature_id);

struct SplitCandidate {
    SplitRule rule;
    double impurity_decrease = 0.0; // parent gini minus weighted child gini
};

/// Exhaustive best binary split over the full dataset. Candidates are
/// scanned features-first in catalog order; per feature, thresholds ascend
/// over midpoints of consecutive distinct values, subsets follow the
/// documented canonical order, booleans have one rule. Strictly better
/// weighted child impurity wins; ties keep the earliest candidate. Returns
/// nullopt when no rule yields two children of at least min_samples_leaf
/// rows or the best decrease is below min_impurity_decrease.
std::optional<SplitCandidate> best_split(const Dataset& ds,
                                         std::span<const std::size_t> candidate_features,
                                         const TreeParams& params = {});

/// Recursive CART. A node becomes a leaf when it is pure, when no
/// admissible split exists, at max_depth, or below min_samples_split.
/// Throws TrainError(EmptyDataset).
DecisionTree build_tree(const Dataset& ds, const TreeParams& params = {});

/// Routes x to a leaf and returns its index.
std::size_t route_tree(const DecisionTree& tree, const FeatureVector& x);

/// Class distribution at the leaf x reaches. A categorical value never seen
/// on the left side of a subset rule routes right.
std::vector<double> predict_tree(const DecisionTree& tree, const FeatureVector& x);

/// Bagged forest: n_trees bootstrap resamples (same size, with replacement),
/// sqrt feature sampling per node by default. Tree i draws its randomness
/// from mix_seed(params.rng_seed, i), so parallel and serial builds agree
/// bit for bit.
EnsembleModel train_random_forest(const Dataset& ds, std::size_t n_trees = 100,
                                  TreeParams params = {.features_per_node =
                                                           FeatureSampling::Sqrt},
                                  bool bootstrap = true);

/// Extremely randomized trees: no bootstrap; per candidate feature a single
/// uniformly random threshold/subset instead of the exhaustive best.
EnsembleModel train_extra_trees(const Dataset& ds, std::size_t n_trees = 100,
                                TreeParams params = {.features_per_node =
                                                         FeatureSampling::Sqrt});

/// Gradient boosting with softmax cross-entropy: each round fits one
/// regression tree per class to the residual (onehot - softmax), leaf
/// values by an L2-regularized Newton step. Zero rounds predicts uniform.
EnsembleModel train_boosted(const Dataset& ds, const BoostParams& params = {});

std::vector<double> predict_ensemble(const EnsembleModel& model, const FeatureVector& x);

/// Training-set mean softmax cross-entropy of a boosted model truncated to
/// the first `rounds` rounds; exposed for convergence checks.
double boosted_log_loss(const EnsembleModel& model, const Dataset& ds, std::size_t rounds);

} // namespace packtriage

#endif
