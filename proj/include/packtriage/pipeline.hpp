#ifndef PACKTRIAGE_PIPELINE_HPP
#define PACKTRIAGE_PIPELINE_HPP

#include "packtriage/classifiers.hpp"
#include "packtriage/importance.hpp"
#include "packtriage/labeling.hpp"
#include "packtriage/synth.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace packtriage {

enum class ImportanceMethod { Impurity, Permutation };

std::string importance_method_name(ImportanceMethod method);

/// One feature-selection source: a tree-family model plus the importance
/// method used to rank features with it.
struct SelectionSource {
    ClassifierKind model = ClassifierKind::DecisionTree; // tree kinds only
    ImportanceMethod method = ImportanceMethod::Impurity;

    std::string name() const {
        return classifier_kind_name(model) + "+" + importance_method_name(method);
    }
};

/// The four tree kinds crossed with both importance methods.
std::vector<SelectionSource> default_selection_sources();

/// The seven supported classifier kinds with default hyperparameters.
std::vector<ClassifierSpec> default_classifier_specs();

struct PipelineConfig {
    FeatureCatalog catalog; // empty means default_catalog()
    LabelingConfig labeling;
    std::vector<SelectionSource> selection_sources = default_selection_sources();
    std::vector<ClassifierSpec> classifier_specs = default_classifier_specs();
    std::size_t top_k = 20;
    double split_ratio = 0.70;
    int permutation_repeats = 5;
    std::uint64_t rng_seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified split: per class, a seeded shuffle sends floor(ratio * n) rows
/// to train (at least one when the class has two or more rows) and the rest
/// to test. Index lists come back sorted. Throws TrainError(EmptyDataset).
SplitIndices split_indices(const std::vector<int>& labels, std::size_t n_classes,
                           double ratio, std::uint64_t seed);

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double ratio = 0.70,
                                          std::uint64_t seed = 0);

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows);

/// Parses, extracts, and labels a corpus in one pass (file-parallel).
struct CorpusExtraction {
    Dataset dataset;                    // class names in PackLabel order
    std::vector<std::string> row_paths; // aligned with dataset rows
    std::vector<CorpusError> errors;
};

CorpusExtraction extract_corpus(const std::vector<std::string>& paths,
                                const FeatureCatalog& catalog,
                                const LabelingConfig& labeling);

struct SelectionResult {
    std::string name;
    ImportanceReport report;
    std::vector<std::string> top_features;
};

struct PackerRow {
    std::string path;
    std::string packer; // "UNKNOWN" when no signature matches
};

struct RunReport {
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<std::string> class_names;
    std::vector<SelectionResult> selections;
    std::vector<ClassifierSpec> specs;
    ScenarioGrid grid;
    std::vector<PackerRow> packer_rows; // test files the best model calls well-known
    std::vector<std::pair<std::string, std::size_t>> packer_counts;
    std::vector<CorpusError> errors;
};

/// Runs the three stages end to end. Step 1 trains every selection source
/// on the training split (permutation importance evaluates on the held-out
/// split); step 2 runs the scenario grid; step 3 re-runs the winning cell's
/// model over the test rows and identifies the packer of every file it
/// classifies as well-known packed. Step 3 needs file paths, so it is
/// skipped when `row_paths` is empty.
RunReport run_pipeline(const Dataset& ds, const std::vector<std::string>& row_paths,
                       const PipelineConfig& cfg);
RunReport run_pipeline(const std::vector<std::string>& corpus_paths,
                       const PipelineConfig& cfg);

/// Structured-text rendering (schema `packtriage/1 report` with SELECTION,
/// GRID, CONFUSION, PACKERS, ERRORS sections). Identical inputs render byte
/// for byte identically.
std::string render_report(const RunReport& report);

// ---- persistence ----

struct ModelArtifact {
    int format_version = 1;
    TrainedModel model;
    std::uint64_t seed = 0;
    std::int64_t created_unix = 0;
    std::size_t trained_rows = 0;
};

/// Versioned structured text (`packtriage/1 model`). Numbers round-trip
/// exactly, so a loaded artifact predicts bit-identically.
void save_model(const ModelArtifact& artifact, const std::string& path);
std::string render_model(const ModelArtifact& artifact);

/// Throws ArtifactError: VersionMismatch for an unknown version line,
/// Corrupt for anything else that fails to parse.
ModelArtifact load_model(const std::string& path);
ModelArtifact parse_model(const std::string& text);

/// Importance report as structured text (`packtriage/1 selection`).
std::string render_selection(const ImportanceReport& report);
void save_selection(const ImportanceReport& report, const std::string& path);
ImportanceReport load_selection(const std::string& path);

} // namespace packtriage

#endif
