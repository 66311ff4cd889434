#ifndef PACKTRIAGE_CLASSIFIERS_HPP
#define PACKTRIAGE_CLASSIFIERS_HPP

#include "packtriage/cart.hpp"
#include "packtriage/importance.hpp"

#include <optional>
#include <string>
#include <vector>

namespace packtriage {

enum class ClassifierKind {
    DecisionTree,
    RandomForest,
    ExtraTrees,
    Boosted,
    Knn,
    GaussianNb,
    LogisticRegression
};

std::string classifier_kind_name(ClassifierKind kind);
std::optional<ClassifierKind> classifier_kind_from_name(std::string_view name);

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::DecisionTree;

    TreeParams tree_params;   // tree family; rng_seed lives here
    std::size_t n_trees = 100;
    BoostParams boost_params;

    std::size_t knn_k = 3;

    std::size_t logreg_iterations = 500;
    double logreg_step = 0.1;
    double logreg_l2 = 1e-4;

    // Default: standardize for knn and logistic regression only.
    std::optional<bool> standardize;

    bool wants_standardize() const {
        if (standardize) return *standardize;
        return kind == ClassifierKind::Knn || kind == ClassifierKind::LogisticRegression;
    }
};

/// A fitted classifier over a projected feature subset. Standardization
/// statistics come from the training projection only; categorical columns
/// are never standardized (kNN compares them as 0/1 mismatch).
struct TrainedModel {
    ClassifierSpec spec;
    FeatureCatalog catalog; // full input catalog
    FeatureCatalog projected_catalog;
    std::vector<std::string> class_names;
    std::vector<std::size_t> feature_indices; // into full vectors

    bool standardized = false;
    std::vector<double> means; // per projected column
    std::vector<double> stds;

    DecisionTree tree;     // DecisionTree kind
    EnsembleModel ensemble; // forest / extra trees / boosted

    std::vector<FeatureVector> knn_rows; // standardized projected rows
    std::vector<int> knn_labels;

    std::vector<double> gnb_priors;
    std::vector<std::vector<double>> gnb_means; // [class][column]
    std::vector<std::vector<double>> gnb_vars;  // variance floored at 1e-9

    std::vector<double> logreg_weights; // [class][column..., bias]
};

/// Fits `spec` on the columns named by `features`. Throws TrainError
/// (EmptyDataset, SingleClass) and Error for unknown feature ids.
TrainedModel train(const ClassifierSpec& spec, const Dataset& ds,
                   const std::vector<std::string>& features);

/// Distribution over class_names; always sums to 1.
std::vector<double> predict_proba(const TrainedModel& model, const FeatureVector& x);

int predict_class(const TrainedModel& model, const FeatureVector& x);

struct ConfusionMatrix {
    std::vector<std::vector<std::size_t>> counts; // [true][predicted]

    std::size_t total() const;
    std::size_t trace() const;
};

struct RocPoint {
    double fpr = 0;
    double tpr = 0;
};

struct ClassMetrics {
    double precision = 0;
    double recall = 0; // TPR
    double fpr = 0;
    double f1 = 0;
    double auc = 0.5;
};

struct Metrics {
    double accuracy = 0;
    double macro_f1 = 0;
    double macro_auc = 0;
    ConfusionMatrix confusion;
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<RocPoint>> roc; // per class, (0,0) .. (1,1)
};

/// One-vs-rest ROC by sweeping distinct score thresholds; ties fall into a
/// single threshold group, so the area equals the Mann-Whitney statistic.
/// Degenerate inputs (no positives or no negatives) report AUC 0.5.
double roc_auc(std::span<const double> scores, std::span<const int> positives,
               std::vector<RocPoint>* points = nullptr);

/// Metrics from precomputed probability rows; evaluate() delegates here.
/// Undefined precision or recall (empty denominator) counts as 0; macro AUC
/// averages the classes that have both positives and negatives.
Metrics compute_metrics(const std::vector<std::vector<double>>& probas,
                        const std::vector<int>& labels, std::size_t n_classes);

/// Throws TrainError(EmptyDataset) on an empty test set.
Metrics evaluate(const TrainedModel& model, const Dataset& test);

struct GridSelection {
    std::string name; // e.g. "random_forest+permutation"
    std::vector<std::string> features;
};

struct GridCell {
    std::size_t selection_index = 0;
    std::size_t spec_index = 0;
    Metrics metrics;
};

struct ScenarioGrid {
    std::vector<GridCell> cells; // selection-major order
    std::size_t best_index = 0;  // highest accuracy; ties by macro F1, then
                                 // macro AUC, then grid order
};

/// Trains and evaluates every selection x spec combination. Cells run in
/// parallel; each derives its seed from rng_seed and its grid position, so
/// the grid is reproducible regardless of scheduling.
ScenarioGrid run_scenario_grid(const Dataset& train_ds, const Dataset& test_ds,
                               const std::vector<GridSelection>& selections,
                               const std::vector<ClassifierSpec>& specs,
                               std::uint64_t rng_seed = 0);

} // namespace packtriage

#endif
