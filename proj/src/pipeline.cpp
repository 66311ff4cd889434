#include "packtriage/pipeline.hpp"

#include "packtriage/errors.hpp"
#include "packtriage/parallel.hpp"
#include "packtriage/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace packtriage {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

// Seed streams for the pipeline stages.
constexpr std::uint64_t kSplitStream = 0;
constexpr std::uint64_t kSelectionStream = 1;
constexpr std::uint64_t kGridStream = 2;

struct SelectionModel {
    DecisionTree tree;
    EnsembleModel ensemble;
    bool is_single_tree = false;
};

SelectionModel train_selection_model(const SelectionSource& source, const Dataset& train,
                                     std::uint64_t seed) {
    SelectionModel model;
    TreeParams params;
    params.rng_seed = seed;
    switch (source.model) {
    case ClassifierKind::DecisionTree:
        model.tree = build_tree(train, params);
        model.is_single_tree = true;
        break;
    case ClassifierKind::RandomForest:
        params.features_per_node = FeatureSampling::Sqrt;
        model.ensemble = train_random_forest(train, 100, params);
        break;
    case ClassifierKind::ExtraTrees:
        params.features_per_node = FeatureSampling::Sqrt;
        model.ensemble = train_extra_trees(train, 100, params);
        break;
    case ClassifierKind::Boosted:
        model.ensemble = train_boosted(train, BoostParams{});
        break;
    default:
        throw Error("selection sources must be tree models, got " +
                    classifier_kind_name(source.model));
    }
    return model;
}

ImportanceReport selection_importance(const SelectionSource& source, const Dataset& train,
                                      const Dataset& heldout, int repeats,
                                      std::uint64_t seed) {
    const SelectionModel model = train_selection_model(source, train, seed);
    if (source.method == ImportanceMethod::Impurity)
        return model.is_single_tree ? impurity_importance(model.tree)
                                    : impurity_importance(model.ensemble);
    const std::uint64_t perm_seed = mix_seed(seed, 0x7065726D);
    return model.is_single_tree
               ? permutation_importance(model.tree, heldout, repeats, perm_seed)
               : permutation_importance(model.ensemble, heldout, repeats, perm_seed);
}

} // namespace

std::string importance_method_name(ImportanceMethod method) {
    return method == ImportanceMethod::Impurity ? "impurity" : "permutation";
}

std::vector<SelectionSource> default_selection_sources() {
    std::vector<SelectionSource> sources;
    for (ClassifierKind kind : {ClassifierKind::DecisionTree, ClassifierKind::RandomForest,
                                ClassifierKind::ExtraTrees, ClassifierKind::Boosted})
        for (ImportanceMethod method :
             {ImportanceMethod::Impurity, ImportanceMethod::Permutation})
            sources.push_back({kind, method});
    return sources;
}

std::vector<ClassifierSpec> default_classifier_specs() {
    std::vector<ClassifierSpec> specs;
    for (ClassifierKind kind :
         {ClassifierKind::DecisionTree, ClassifierKind::RandomForest,
          ClassifierKind::ExtraTrees, ClassifierKind::Boosted, ClassifierKind::Knn,
          ClassifierKind::GaussianNb, ClassifierKind::LogisticRegression}) {
        ClassifierSpec spec;
        spec.kind = kind;
        specs.push_back(spec);
    }
    return specs;
}

SplitIndices split_indices(const std::vector<int>& labels, std::size_t n_classes,
                           double ratio, std::uint64_t seed) {
    if (labels.empty())
        throw TrainError(TrainError::Code::EmptyDataset, "cannot split an empty dataset");

    SplitIndices out;
    for (std::size_t cls = 0; cls < n_classes; ++cls) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == int(cls)) rows.push_back(i);
        if (rows.empty()) continue;

        Rng rng(mix_seed(seed, cls));
        rng.shuffle(rows);
        std::size_t n_train = static_cast<std::size_t>(ratio * double(rows.size()));
        if (n_train == 0 && rows.size() >= 2) n_train = 1;
        for (std::size_t i = 0; i < rows.size(); ++i)
            (i < n_train ? out.train : out.test).push_back(rows[i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.catalog = ds.catalog;
    out.class_names = ds.class_names;
    out.rows.reserve(rows.size());
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        out.rows.push_back(ds.rows[r]);
        out.labels.push_back(ds.labels[r]);
    }
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double ratio,
                                          std::uint64_t seed) {
    const auto idx = split_indices(ds.labels, ds.n_classes(), ratio, seed);
    return {take_rows(ds, idx.train), take_rows(ds, idx.test)};
}

CorpusExtraction extract_corpus(const std::vector<std::string>& paths,
                                const FeatureCatalog& catalog,
                                const LabelingConfig& labeling) {
    struct PerFile {
        bool ok = false;
        FeatureVector row;
        PackLabel label = PackLabel::NotPacked;
        std::string error;
    };
    std::vector<PerFile> results(paths.size());

    parallel_for(paths.size(), [&](std::size_t i) {
        try {
            const auto bytes = read_file_bytes(paths[i]);
            const PeFile pe = parse_pe(bytes);
            results[i].row = extract_features(pe, catalog);
            results[i].label = label_file(pe, labeling);
            results[i].ok = true;
        } catch (const std::exception& e) {
            results[i].error = e.what();
        }
    });

    CorpusExtraction out;
    out.dataset.catalog = catalog;
    for (PackLabel label : kAllPackLabels)
        out.dataset.class_names.push_back(pack_label_name(label));
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!results[i].ok) {
            out.errors.push_back({paths[i], results[i].error});
            continue;
        }
        out.dataset.rows.push_back(std::move(results[i].row));
        out.dataset.labels.push_back(static_cast<int>(results[i].label));
        out.row_paths.push_back(paths[i]);
    }
    return out;
}

RunReport run_pipeline(const Dataset& ds, const std::vector<std::string>& row_paths,
                       const PipelineConfig& cfg) {
    if (ds.n_rows() == 0)
        throw TrainError(TrainError::Code::EmptyDataset, "pipeline needs a nonempty dataset");

    RunReport report;
    report.seed = cfg.rng_seed;
    report.class_names = ds.class_names;
    report.specs = cfg.classifier_specs;

    const auto split = split_indices(ds.labels, ds.n_classes(), cfg.split_ratio,
                                     mix_seed(cfg.rng_seed, kSplitStream));
    const Dataset train_ds = take_rows(ds, split.train);
    const Dataset test_ds = take_rows(ds, split.test);
    report.n_train = train_ds.n_rows();
    report.n_test = test_ds.n_rows();

    // Step 1: feature selection per source.
    const std::uint64_t selection_seed = mix_seed(cfg.rng_seed, kSelectionStream);
    report.selections.resize(cfg.selection_sources.size());
    for (std::size_t i = 0; i < cfg.selection_sources.size(); ++i) {
        const auto& source = cfg.selection_sources[i];
        SelectionResult result;
        result.name = source.name();
        result.report = selection_importance(source, train_ds, test_ds,
                                             cfg.permutation_repeats,
                                             mix_seed(selection_seed, i));
        result.top_features = select_top_k(result.report, cfg.top_k);
        report.selections[i] = std::move(result);
    }

    // Step 2: scenario grid over selections x classifiers.
    std::vector<GridSelection> selections;
    for (const auto& s : report.selections)
        selections.push_back({s.name, s.top_features});
    const std::uint64_t grid_seed = mix_seed(cfg.rng_seed, kGridStream);
    report.grid =
        run_scenario_grid(train_ds, test_ds, selections, cfg.classifier_specs, grid_seed);

    // Step 3: identify packers for test files the winning model classifies
    // as well-known packed. Re-training with the winning cell's seed
    // reproduces the grid model exactly.
    const auto wk_it = std::find(ds.class_names.begin(), ds.class_names.end(),
                                 pack_label_name(PackLabel::WellKnownPacked));
    if (!row_paths.empty() && cfg.labeling.signature_db != nullptr &&
        wk_it != ds.class_names.end() && !report.grid.cells.empty()) {
        const int wk_class = static_cast<int>(wk_it - ds.class_names.begin());
        const auto& best = report.grid.cells[report.grid.best_index];
        ClassifierSpec spec = cfg.classifier_specs[best.spec_index];
        spec.tree_params.rng_seed = mix_seed(grid_seed, report.grid.best_index);
        const TrainedModel model =
            train(spec, train_ds, selections[best.selection_index].features);

        std::map<std::string, std::size_t> counts;
        for (std::size_t i = 0; i < split.test.size(); ++i) {
            const std::size_t row = split.test[i];
            if (predict_class(model, ds.rows[row]) != wk_class) continue;
            const PeFile pe = parse_pe(read_file_bytes(row_paths[row]));
            const MatchResult match = identify_packer(pe, *cfg.labeling.signature_db);
            const std::string name = match.matched() ? *match.packer_name : "UNKNOWN";
            report.packer_rows.push_back({row_paths[row], name});
            ++counts[name];
        }
        report.packer_counts.assign(counts.begin(), counts.end());
        std::sort(report.packer_counts.begin(), report.packer_counts.end(),
                  [](const auto& a, const auto& b) {
                      if (a.second != b.second) return a.second > b.second;
                      return a.first < b.first;
                  });
    }
    return report;
}

RunReport run_pipeline(const std::vector<std::string>& corpus_paths,
                       const PipelineConfig& cfg) {
    const FeatureCatalog catalog =
        cfg.catalog.entries.empty() ? default_catalog() : cfg.catalog;
    CorpusExtraction extraction = extract_corpus(corpus_paths, catalog, cfg.labeling);
    RunReport report = run_pipeline(extraction.dataset, extraction.row_paths, cfg);
    report.errors = std::move(extraction.errors);
    return report;
}

std::string render_report(const RunReport& report) {
    std::ostringstream out;
    out << "packtriage/1 report\n";
    out << "seed " << report.seed << "\n";
    out << "train " << report.n_train << "\n";
    out << "test " << report.n_test << "\n";

    for (const auto& selection : report.selections) {
        out << "\nSELECTION " << selection.name << "\n";
        for (std::size_t i = 0; i < selection.top_features.size(); ++i) {
            const auto& id = selection.top_features[i];
            double score = 0;
            for (const auto& fs : selection.report.scores)
                if (fs.feature_id == id) score = fs.score;
            out << i + 1 << "," << id << "," << fmt_fixed(score, 9) << "\n";
        }
    }

    out << "\nGRID\n";
    out << "selection,classifier,accuracy,macro_f1,macro_auc\n";
    for (const auto& cell : report.grid.cells) {
        out << report.selections[cell.selection_index].name << ","
            << classifier_kind_name(report.specs[cell.spec_index].kind) << ","
            << fmt_fixed(cell.metrics.accuracy, 6) << ","
            << fmt_fixed(cell.metrics.macro_f1, 6) << ","
            << fmt_fixed(cell.metrics.macro_auc, 6) << "\n";
    }
    if (!report.grid.cells.empty()) {
        const auto& best = report.grid.cells[report.grid.best_index];
        out << "BEST " << report.selections[best.selection_index].name << ","
            << classifier_kind_name(report.specs[best.spec_index].kind) << "\n";

        out << "\nCONFUSION\n";
        out << "classes ";
        for (std::size_t i = 0; i < report.class_names.size(); ++i)
            out << (i ? "|" : "") << report.class_names[i];
        out << "\n";
        const auto& confusion = best.metrics.confusion;
        for (std::size_t r = 0; r < confusion.counts.size(); ++r) {
            for (std::size_t c = 0; c < confusion.counts[r].size(); ++c)
                out << (c ? " " : "") << confusion.counts[r][c];
            out << "\n";
        }
    }

    out << "\nPACKERS\n";
    for (const auto& [name, count] : report.packer_counts)
        out << count << " " << name << "\n";

    if (!report.errors.empty()) {
        out << "\nERRORS\n";
        for (const auto& e : report.errors) out << e.path << ": " << e.message << "\n";
    }
    return out.str();
}

// ---- persistence ----

namespace {

void render_tree(std::ostringstream& out, const DecisionTree& tree) {
    out << "tree " << tree.nodes.size() << " " << tree.class_names.size() << "\n";
    for (const auto& node : tree.nodes) {
        out << "node " << node.sample_count << " " << fmt_double(node.impurity);
        for (std::size_t c : node.class_counts) out << " " << c;
        if (node.is_leaf()) {
            out << " leaf";
            for (double d : node.leaf_distribution) out << " " << fmt_double(d);
        } else {
            const auto& rule = *node.split;
            out << " split " << rule.feature_index << " ";
            switch (rule.kind) {
            case SplitRule::Kind::Threshold:
                out << "threshold " << fmt_double(rule.threshold);
                break;
            case SplitRule::Kind::Subset: out << "subset " << rule.subset_mask; break;
            case SplitRule::Kind::Boolean: out << "boolean 0"; break;
            }
            out << " " << node.left << " " << node.right;
        }
        out << "\n";
    }
}

void render_gradient_tree(std::ostringstream& out, const GradientTree& tree) {
    out << "gtree " << tree.nodes.size() << "\n";
    for (const auto& node : tree.nodes) {
        out << "gnode " << node.sample_count << " " << fmt_double(node.impurity);
        if (node.is_leaf()) {
            out << " leaf " << fmt_double(node.leaf_value);
        } else {
            const auto& rule = *node.split;
            out << " split " << rule.feature_index << " ";
            switch (rule.kind) {
            case SplitRule::Kind::Threshold:
                out << "threshold " << fmt_double(rule.threshold);
                break;
            case SplitRule::Kind::Subset: out << "subset " << rule.subset_mask; break;
            case SplitRule::Kind::Boolean: out << "boolean 0"; break;
            }
            out << " " << node.left << " " << node.right;
        }
        out << "\n";
    }
}

class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string word() {
        std::string w;
        if (!(in_ >> w))
            throw ArtifactError(ArtifactError::Code::Corrupt, "unexpected end of artifact");
        return w;
    }

    void expect(const std::string& expected) {
        const std::string got = word();
        if (got != expected)
            throw ArtifactError(ArtifactError::Code::Corrupt,
                                "expected '" + expected + "', got '" + got + "'");
    }

    std::uint64_t u64() {
        return parse<std::uint64_t>(
            [](const std::string& s, std::size_t* used) { return std::stoull(s, used, 10); });
    }
    std::int64_t i64() {
        return parse<std::int64_t>(
            [](const std::string& s, std::size_t* used) { return std::stoll(s, used, 10); });
    }
    std::size_t size() { return static_cast<std::size_t>(u64()); }
    int integer() { return static_cast<int>(i64()); }

    double real() {
        const std::string w = word();
        char* end = nullptr;
        const double v = std::strtod(w.c_str(), &end);
        if (end != w.c_str() + w.size())
            throw ArtifactError(ArtifactError::Code::Corrupt, "bad number '" + w + "'");
        return v;
    }

    std::string rest_of_line() {
        std::string line;
        std::getline(in_, line);
        if (!line.empty() && line.front() == ' ') line.erase(0, 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }

private:
    template <class T, class Fn>
    T parse(Fn fn) {
        const std::string w = word();
        try {
            std::size_t used = 0;
            const T v = static_cast<T>(fn(w, &used));
            if (used != w.size()) throw std::invalid_argument(w);
            return v;
        } catch (const ArtifactError&) {
            throw;
        } catch (const std::exception&) {
            throw ArtifactError(ArtifactError::Code::Corrupt, "bad integer '" + w + "'");
        }
    }

    std::istream& in_;
};

SplitRule parse_rule(TokenReader& reader, std::size_t feature) {
    SplitRule rule;
    rule.feature_index = feature;
    const std::string kind = reader.word();
    if (kind == "threshold") {
        rule.kind = SplitRule::Kind::Threshold;
        rule.threshold = reader.real();
    } else if (kind == "subset") {
        rule.kind = SplitRule::Kind::Subset;
        rule.subset_mask = static_cast<std::uint32_t>(reader.u64());
    } else if (kind == "boolean") {
        rule.kind = SplitRule::Kind::Boolean;
        reader.word(); // placeholder parameter
    } else {
        throw ArtifactError(ArtifactError::Code::Corrupt, "bad rule kind '" + kind + "'");
    }
    return rule;
}

DecisionTree parse_tree(TokenReader& reader, const FeatureCatalog& catalog,
                        const std::vector<std::string>& class_names) {
    reader.expect("tree");
    const std::size_t n_nodes = reader.size();
    const std::size_t n_classes = reader.size();
    DecisionTree tree;
    tree.catalog = catalog;
    tree.class_names = class_names;
    tree.nodes.resize(n_nodes);
    for (auto& node : tree.nodes) {
        reader.expect("node");
        node.sample_count = reader.size();
        node.impurity = reader.real();
        node.class_counts.resize(n_classes);
        for (auto& c : node.class_counts) c = reader.size();
        const std::string tag = reader.word();
        if (tag == "leaf") {
            node.leaf_distribution.resize(n_classes);
            for (auto& d : node.leaf_distribution) d = reader.real();
        } else if (tag == "split") {
            const std::size_t feature = reader.size();
            node.split = parse_rule(reader, feature);
            node.left = reader.integer();
            node.right = reader.integer();
        } else {
            throw ArtifactError(ArtifactError::Code::Corrupt, "bad node tag '" + tag + "'");
        }
    }
    return tree;
}

GradientTree parse_gradient_tree(TokenReader& reader) {
    reader.expect("gtree");
    const std::size_t n_nodes = reader.size();
    GradientTree tree;
    tree.nodes.resize(n_nodes);
    for (auto& node : tree.nodes) {
        reader.expect("gnode");
        node.sample_count = reader.size();
        node.impurity = reader.real();
        const std::string tag = reader.word();
        if (tag == "leaf") {
            node.leaf_value = reader.real();
        } else if (tag == "split") {
            const std::size_t feature = reader.size();
            node.split = parse_rule(reader, feature);
            node.left = reader.integer();
            node.right = reader.integer();
        } else {
            throw ArtifactError(ArtifactError::Code::Corrupt, "bad node tag '" + tag + "'");
        }
    }
    return tree;
}

std::string kind_word(FeatureKind kind) {
    switch (kind) {
    case FeatureKind::Numeric: return "numeric";
    case FeatureKind::Boolean: return "boolean";
    case FeatureKind::Categorical: return "categorical";
    }
    return "?";
}

FeatureKind kind_from_word(const std::string& word) {
    if (word == "numeric") return FeatureKind::Numeric;
    if (word == "boolean") return FeatureKind::Boolean;
    if (word == "categorical") return FeatureKind::Categorical;
    throw ArtifactError(ArtifactError::Code::Corrupt, "bad feature kind '" + word + "'");
}

} // namespace

std::string render_model(const ModelArtifact& artifact) {
    const TrainedModel& model = artifact.model;
    std::ostringstream out;
    out << "packtriage/1 model\n";
    out << "kind " << classifier_kind_name(model.spec.kind) << "\n";
    out << "seed " << artifact.seed << "\n";
    out << "created " << artifact.created_unix << "\n";
    out << "rows " << artifact.trained_rows << "\n";
    out << "knn_k " << model.spec.knn_k << "\n";
    out << "classes " << model.class_names.size() << "\n";
    for (const auto& name : model.class_names) out << name << "\n";
    out << "catalog " << model.catalog.size() << "\n";
    for (const auto& entry : model.catalog.entries) {
        out << entry.id << " " << kind_word(entry.kind);
        if (entry.kind == FeatureKind::Categorical) {
            out << " ";
            for (std::size_t i = 0; i < entry.categories.size(); ++i)
                out << (i ? "|" : "") << entry.categories[i];
        }
        out << "\n";
    }
    out << "features " << model.feature_indices.size() << "\n";
    for (std::size_t i = 0; i < model.feature_indices.size(); ++i)
        out << (i ? " " : "") << model.feature_indices[i];
    out << "\n";
    out << "standardize " << (model.standardized ? 1 : 0) << "\n";
    if (model.standardized) {
        out << "means";
        for (double m : model.means) out << " " << fmt_double(m);
        out << "\nstds";
        for (double s : model.stds) out << " " << fmt_double(s);
        out << "\n";
    }

    out << "MODEL\n";
    switch (model.spec.kind) {
    case ClassifierKind::DecisionTree: render_tree(out, model.tree); break;
    case ClassifierKind::RandomForest:
    case ClassifierKind::ExtraTrees: {
        out << "ensemble "
            << (model.ensemble.kind == EnsembleKind::RandomForest ? "random_forest"
                                                                  : "extra_trees")
            << " " << model.ensemble.trees.size() << "\n";
        for (const auto& tree : model.ensemble.trees) render_tree(out, tree);
        break;
    }
    case ClassifierKind::Boosted: {
        const auto& boosted = model.ensemble.boosted;
        out << "boosted " << fmt_double(boosted.learning_rate) << " "
            << boosted.base_scores.size() << " " << boosted.rounds.size() << "\n";
        out << "base";
        for (double b : boosted.base_scores) out << " " << fmt_double(b);
        out << "\n";
        for (const auto& layer : boosted.rounds)
            for (const auto& tree : layer) render_gradient_tree(out, tree);
        break;
    }
    case ClassifierKind::Knn: {
        out << "knn " << model.spec.knn_k << " " << model.knn_rows.size() << " "
            << model.projected_catalog.size() << "\n";
        for (std::size_t r = 0; r < model.knn_rows.size(); ++r) {
            out << "row " << model.knn_labels[r];
            for (double v : model.knn_rows[r].values) out << " " << fmt_double(v);
            out << "\n";
        }
        break;
    }
    case ClassifierKind::GaussianNb: {
        out << "gnb " << model.gnb_priors.size() << " " << model.projected_catalog.size()
            << "\n";
        out << "priors";
        for (double p : model.gnb_priors) out << " " << fmt_double(p);
        out << "\n";
        for (std::size_t cls = 0; cls < model.gnb_means.size(); ++cls) {
            out << "mean " << cls;
            for (double v : model.gnb_means[cls]) out << " " << fmt_double(v);
            out << "\nvar " << cls;
            for (double v : model.gnb_vars[cls]) out << " " << fmt_double(v);
            out << "\n";
        }
        break;
    }
    case ClassifierKind::LogisticRegression: {
        const std::size_t stride = model.projected_catalog.size() + 1;
        out << "logreg " << model.class_names.size() << " " << stride << "\n";
        for (std::size_t cls = 0; cls < model.class_names.size(); ++cls) {
            out << "w " << cls;
            for (std::size_t c = 0; c < stride; ++c)
                out << " " << fmt_double(model.logreg_weights[cls * stride + c]);
            out << "\n";
        }
        break;
    }
    }
    out << "END\n";
    return out.str();
}

void save_model(const ModelArtifact& artifact, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << render_model(artifact);
}

ModelArtifact parse_model(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header))
        throw ArtifactError(ArtifactError::Code::Corrupt, "empty artifact");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != "packtriage/1 model") {
        if (header.starts_with("packtriage/"))
            throw ArtifactError(ArtifactError::Code::VersionMismatch,
                                "unsupported artifact version '" + header + "'");
        throw ArtifactError(ArtifactError::Code::Corrupt, "not a model artifact");
    }

    ModelArtifact artifact;
    TrainedModel& model = artifact.model;
    TokenReader reader(in);

    reader.expect("kind");
    const std::string kind_name = reader.word();
    const auto kind = classifier_kind_from_name(kind_name);
    if (!kind)
        throw ArtifactError(ArtifactError::Code::Corrupt,
                            "unknown classifier kind '" + kind_name + "'");
    model.spec.kind = *kind;

    reader.expect("seed");
    artifact.seed = reader.u64();
    model.spec.tree_params.rng_seed = artifact.seed;
    reader.expect("created");
    artifact.created_unix = reader.i64();
    reader.expect("rows");
    artifact.trained_rows = reader.size();
    reader.expect("knn_k");
    model.spec.knn_k = reader.size();

    reader.expect("classes");
    const std::size_t n_classes = reader.size();
    reader.rest_of_line();
    for (std::size_t i = 0; i < n_classes; ++i)
        model.class_names.push_back(reader.rest_of_line());

    reader.expect("catalog");
    const std::size_t n_catalog = reader.size();
    reader.rest_of_line();
    for (std::size_t i = 0; i < n_catalog; ++i) {
        std::istringstream line(reader.rest_of_line());
        TokenReader entry_reader(line);
        CatalogEntry entry;
        entry.id = entry_reader.word();
        entry.kind = kind_from_word(entry_reader.word());
        if (entry.kind == FeatureKind::Categorical) {
            const std::string cats = entry_reader.rest_of_line();
            std::size_t pos = 0;
            while (true) {
                const std::size_t bar = cats.find('|', pos);
                if (bar == std::string::npos) {
                    entry.categories.push_back(cats.substr(pos));
                    break;
                }
                entry.categories.push_back(cats.substr(pos, bar - pos));
                pos = bar + 1;
            }
        }
        model.catalog.entries.push_back(std::move(entry));
    }

    reader.expect("features");
    const std::size_t n_features = reader.size();
    for (std::size_t i = 0; i < n_features; ++i) {
        const std::size_t idx = reader.size();
        if (idx >= model.catalog.size())
            throw ArtifactError(ArtifactError::Code::Corrupt, "feature index out of range");
        model.feature_indices.push_back(idx);
        model.projected_catalog.entries.push_back(model.catalog.entries[idx]);
    }

    reader.expect("standardize");
    model.standardized = reader.integer() != 0;
    if (model.standardized) {
        reader.expect("means");
        model.means.resize(n_features);
        for (auto& m : model.means) m = reader.real();
        reader.expect("stds");
        model.stds.resize(n_features);
        for (auto& s : model.stds) s = reader.real();
    }

    reader.expect("MODEL");
    switch (model.spec.kind) {
    case ClassifierKind::DecisionTree:
        model.tree = parse_tree(reader, model.projected_catalog, model.class_names);
        break;
    case ClassifierKind::RandomForest:
    case ClassifierKind::ExtraTrees: {
        reader.expect("ensemble");
        const std::string ensemble_kind = reader.word();
        model.ensemble.kind = ensemble_kind == "random_forest" ? EnsembleKind::RandomForest
                                                               : EnsembleKind::ExtraTrees;
        model.ensemble.catalog = model.projected_catalog;
        model.ensemble.class_names = model.class_names;
        const std::size_t n_trees = reader.size();
        for (std::size_t i = 0; i < n_trees; ++i)
            model.ensemble.trees.push_back(
                parse_tree(reader, model.projected_catalog, model.class_names));
        break;
    }
    case ClassifierKind::Boosted: {
        reader.expect("boosted");
        model.ensemble.kind = EnsembleKind::Boosted;
        model.ensemble.catalog = model.projected_catalog;
        model.ensemble.class_names = model.class_names;
        model.ensemble.boosted.learning_rate = reader.real();
        const std::size_t k = reader.size();
        const std::size_t rounds = reader.size();
        reader.expect("base");
        model.ensemble.boosted.base_scores.resize(k);
        for (auto& b : model.ensemble.boosted.base_scores) b = reader.real();
        for (std::size_t r = 0; r < rounds; ++r) {
            std::vector<GradientTree> layer;
            for (std::size_t c = 0; c < k; ++c)
                layer.push_back(parse_gradient_tree(reader));
            model.ensemble.boosted.rounds.push_back(std::move(layer));
        }
        break;
    }
    case ClassifierKind::Knn: {
        reader.expect("knn");
        model.spec.knn_k = reader.size();
        const std::size_t n_rows = reader.size();
        const std::size_t n_cols = reader.size();
        for (std::size_t r = 0; r < n_rows; ++r) {
            reader.expect("row");
            model.knn_labels.push_back(reader.integer());
            FeatureVector row;
            row.values.resize(n_cols);
            for (auto& v : row.values) v = reader.real();
            model.knn_rows.push_back(std::move(row));
        }
        break;
    }
    case ClassifierKind::GaussianNb: {
        reader.expect("gnb");
        const std::size_t k = reader.size();
        const std::size_t n_cols = reader.size();
        reader.expect("priors");
        model.gnb_priors.resize(k);
        for (auto& p : model.gnb_priors) p = reader.real();
        model.gnb_means.assign(k, std::vector<double>(n_cols));
        model.gnb_vars.assign(k, std::vector<double>(n_cols));
        for (std::size_t cls = 0; cls < k; ++cls) {
            reader.expect("mean");
            reader.size();
            for (auto& v : model.gnb_means[cls]) v = reader.real();
            reader.expect("var");
            reader.size();
            for (auto& v : model.gnb_vars[cls]) v = reader.real();
        }
        break;
    }
    case ClassifierKind::LogisticRegression: {
        reader.expect("logreg");
        const std::size_t k = reader.size();
        const std::size_t stride = reader.size();
        model.logreg_weights.resize(k * stride);
        for (std::size_t cls = 0; cls < k; ++cls) {
            reader.expect("w");
            reader.size();
            for (std::size_t c = 0; c < stride; ++c)
                model.logreg_weights[cls * stride + c] = reader.real();
        }
        break;
    }
    }
    reader.expect("END");
    return artifact;
}

ModelArtifact load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << f.rdbuf();
    return parse_model(buffer.str());
}

std::string render_selection(const ImportanceReport& report) {
    std::ostringstream out;
    out << "packtriage/1 selection\n";
    out << "method " << report.method << "\n";
    out << "model " << report.model_desc << "\n";
    out << "seed " << report.rng_seed << " repeats " << report.repeats << "\n";
    out << "scores " << report.scores.size() << "\n";
    for (const auto& fs : report.scores)
        out << fs.feature_id << " " << fmt_double(fs.score) << " " << fs.rank << "\n";
    return out.str();
}

void save_selection(const ImportanceReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << render_selection(report);
}

ImportanceReport load_selection(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    std::string header;
    std::getline(f, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != "packtriage/1 selection")
        throw ArtifactError(ArtifactError::Code::VersionMismatch,
                            "not a selection report: '" + header + "'");
    ImportanceReport report;
    TokenReader reader(f);
    reader.expect("method");
    report.method = reader.word();
    reader.expect("model");
    report.model_desc = reader.word();
    reader.expect("seed");
    report.rng_seed = reader.u64();
    reader.expect("repeats");
    report.repeats = reader.integer();
    reader.expect("scores");
    const std::size_t n = reader.size();
    for (std::size_t i = 0; i < n; ++i) {
        FeatureScore fs;
        fs.feature_id = reader.word();
        fs.score = reader.real();
        fs.rank = reader.integer();
        report.scores.push_back(std::move(fs));
    }
    return report;
}

} // namespace packtriage
