#include "packtriage/entropy.hpp"
#include "packtriage/errors.hpp"
#include "packtriage/parallel.hpp"
#include "packtriage/pipeline.hpp"
#include "packtriage/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace packtriage;

namespace {

std::vector<std::uint8_t> read_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << f.rdbuf();
    return buffer.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << text;
}

/// Directories expand to their regular files (sorted); plain paths pass
/// through unchanged.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<std::string> paths;
    for (const auto& input : inputs) {
        if (fs::is_directory(input)) {
            std::vector<std::string> inside;
            for (const auto& entry : fs::directory_iterator(input))
                if (entry.is_regular_file()) inside.push_back(entry.path().string());
            std::sort(inside.begin(), inside.end());
            paths.insert(paths.end(), inside.begin(), inside.end());
        } else {
            paths.push_back(input);
        }
    }
    return paths;
}

struct CommonOptions {
    std::string sig_db_path;
    std::pair<double, double> packing_range{7.0, 8.0};
    std::uint64_t seed = 0;
    std::string out;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_db) {
    cmd->add_option("--seed", opts.seed, "RNG seed");
    cmd->add_option("--out", opts.out, "output path ('-' for stdout)");
    cmd->add_option("--threads", opts.threads, "thread cap (0 = all cores)");
    if (with_db) {
        cmd->add_option("--sig-db", opts.sig_db_path, "signature database path");
        cmd->add_option("--packing-range", opts.packing_range,
                        "closed entropy interval, e.g. 7.0 8.0");
    }
}

SignatureDb load_db_or_fail(const std::string& path) {
    if (path.empty()) throw Error("--sig-db is required for this command");
    return parse_signature_db(read_text(path));
}

LabelingConfig make_labeling(const CommonOptions& opts, const SignatureDb* db) {
    LabelingConfig cfg;
    cfg.packing_range_low = opts.packing_range.first;
    cfg.packing_range_high = opts.packing_range.second;
    cfg.signature_db = db;
    return cfg;
}

std::uint32_t parse_characteristics(const json& value) {
    if (value.is_number_unsigned() || value.is_number_integer())
        return value.get<std::uint32_t>();
    const std::string text = value.get<std::string>();
    return static_cast<std::uint32_t>(std::stoul(text, nullptr, 0));
}

std::vector<std::uint8_t> parse_hex_bytes(const std::string& text) {
    std::vector<std::uint8_t> bytes;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok)
        bytes.push_back(static_cast<std::uint8_t>(std::stoul(tok, nullptr, 16)));
    return bytes;
}

SyntheticPeSpec parse_synth_spec(const json& j) {
    SyntheticPeSpec spec;
    for (const auto& s : j.at("sections")) {
        SyntheticSection section;
        section.name = s.at("name").get<std::string>();
        section.raw_size = s.at("raw_size").get<std::uint32_t>();
        section.characteristics = parse_characteristics(s.at("characteristics"));
        if (s.contains("content")) {
            const auto& c = s.at("content");
            const std::string kind = c.value("kind", "zero");
            if (kind == "zero")
                section.content = SectionContent::zero_fill();
            else if (kind == "repeat")
                section.content = SectionContent::repeat(c.at("byte").get<std::uint8_t>());
            else if (kind == "random")
                section.content = SectionContent::random(c.at("seed").get<std::uint64_t>());
            else if (kind == "literal")
                section.content = SectionContent::literal(
                    parse_hex_bytes(c.at("bytes").get<std::string>()));
            else
                throw Error("unknown content kind '" + kind + "'");
        }
        spec.sections.push_back(std::move(section));
    }
    const auto& entry = j.at("entry");
    if (entry.value("out_of_range", false)) {
        spec.entry.out_of_range = true;
    } else {
        spec.entry.section = entry.at("section").get<std::string>();
        spec.entry.offset = entry.value("offset", 0u);
    }
    if (j.contains("imports")) {
        spec.import_dlls = j["imports"].value("dlls", 0u);
        spec.import_symbols = j["imports"].value("symbols", 0u);
    }
    spec.tls = j.value("tls", false);
    spec.overlay_size = j.value("overlay", 0u);
    return spec;
}

int cmd_extract(const std::vector<std::string>& inputs, const CommonOptions& opts) {
    const SignatureDb db = load_db_or_fail(opts.sig_db_path);
    const auto paths = expand_inputs(inputs);
    const CorpusExtraction extraction =
        extract_corpus(paths, default_catalog(), make_labeling(opts, &db));

    std::ostringstream csv;
    save_dataset_csv(extraction.dataset, csv);
    write_text(opts.out, csv.str());
    for (const auto& e : extraction.errors)
        std::cerr << e.path << ": " << e.message << "\n";
    return extraction.errors.empty() ? 0 : 1;
}

int cmd_label(const std::vector<std::string>& inputs, const CommonOptions& opts) {
    const SignatureDb db = load_db_or_fail(opts.sig_db_path);
    const auto paths = expand_inputs(inputs);
    const CorpusLabels labels = label_corpus(paths, make_labeling(opts, &db));

    std::ostringstream out;
    for (const auto& entry : labels.labels)
        out << entry.path << "\t" << pack_label_name(entry.label) << "\n";
    out << "\n" << render_label_summary(labels);
    write_text(opts.out, out.str());
    for (const auto& e : labels.errors) std::cerr << e.path << ": " << e.message << "\n";
    return labels.errors.empty() ? 0 : 1;
}

int cmd_select(const std::string& dataset_path, const std::string& model_name,
               const std::string& method_name, std::size_t top_k,
               const CommonOptions& opts) {
    const Dataset ds = load_dataset_csv(dataset_path, default_catalog());
    const auto kind = classifier_kind_from_name(model_name);
    if (!kind ||
        (*kind != ClassifierKind::DecisionTree && *kind != ClassifierKind::RandomForest &&
         *kind != ClassifierKind::ExtraTrees && *kind != ClassifierKind::Boosted))
        throw Error("--model must be a tree kind, got '" + model_name + "'");
    const bool impurity = method_name == "impurity";
    if (!impurity && method_name != "permutation")
        throw Error("--method must be impurity or permutation");

    // mirror the pipeline: fit on the train split, permute on the held-out
    const auto [train_ds, test_ds] = split_dataset(ds, 0.70, mix_seed(opts.seed, 0));
    TreeParams params;
    params.rng_seed = mix_seed(opts.seed, 1);
    ImportanceReport report;
    if (*kind == ClassifierKind::DecisionTree) {
        const DecisionTree tree = build_tree(train_ds, params);
        report = impurity
                     ? impurity_importance(tree)
                     : permutation_importance(tree, test_ds, 5, mix_seed(opts.seed, 2));
    } else {
        params.features_per_node = FeatureSampling::Sqrt;
        EnsembleModel model;
        if (*kind == ClassifierKind::RandomForest)
            model = train_random_forest(train_ds, 100, params);
        else if (*kind == ClassifierKind::ExtraTrees)
            model = train_extra_trees(train_ds, 100, params);
        else
            model = train_boosted(train_ds, BoostParams{});
        report = impurity
                     ? impurity_importance(model)
                     : permutation_importance(model, test_ds, 5, mix_seed(opts.seed, 2));
    }

    write_text(opts.out, render_selection(report));
    std::cerr << "top " << top_k << ":";
    for (const auto& id : select_top_k(report, top_k)) std::cerr << " " << id;
    std::cerr << "\n";
    return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& classifier_name,
              const std::string& selection_path, const std::string& features_csv,
              std::size_t top_k, const CommonOptions& opts) {
    const Dataset ds = load_dataset_csv(dataset_path, default_catalog());
    const auto kind = classifier_kind_from_name(classifier_name);
    if (!kind) throw Error("unknown classifier '" + classifier_name + "'");

    std::vector<std::string> features;
    if (!selection_path.empty()) {
        features = select_top_k(load_selection(selection_path), top_k);
    } else if (!features_csv.empty()) {
        std::istringstream in(features_csv);
        std::string id;
        while (std::getline(in, id, ',')) features.push_back(id);
    } else {
        for (const auto& e : ds.catalog.entries) features.push_back(e.id);
    }

    ClassifierSpec spec;
    spec.kind = *kind;
    spec.tree_params.rng_seed = opts.seed;

    ModelArtifact artifact;
    artifact.model = train(spec, ds, features);
    artifact.seed = opts.seed;
    artifact.created_unix = std::time(nullptr);
    artifact.trained_rows = ds.n_rows();
    if (opts.out.empty()) throw Error("--out is required for train");
    save_model(artifact, opts.out);
    std::cerr << "trained " << classifier_kind_name(*kind) << " on " << ds.n_rows()
              << " rows, " << features.size() << " features -> " << opts.out << "\n";
    return 0;
}

int cmd_classify(const std::string& model_path, const std::vector<std::string>& inputs,
                 const std::string& dataset_path, const CommonOptions& opts) {
    const ModelArtifact artifact = load_model(model_path);
    std::ostringstream out;
    int errors = 0;

    if (!dataset_path.empty()) {
        const Dataset ds = load_dataset_csv(dataset_path, artifact.model.catalog);
        for (std::size_t i = 0; i < ds.n_rows(); ++i) {
            const int cls = predict_class(artifact.model, ds.rows[i]);
            out << i << "\t" << artifact.model.class_names[cls] << "\n";
        }
    } else {
        for (const auto& path : expand_inputs(inputs)) {
            try {
                const PeFile pe = parse_pe(read_binary(path));
                const FeatureVector v = extract_features(pe, artifact.model.catalog);
                const int cls = predict_class(artifact.model, v);
                out << path << "\t" << artifact.model.class_names[cls] << "\n";
            } catch (const std::exception& e) {
                std::cerr << path << ": " << e.what() << "\n";
                ++errors;
            }
        }
    }
    write_text(opts.out, out.str());
    return errors == 0 ? 0 : 1;
}

int cmd_identify(const std::vector<std::string>& inputs, const CommonOptions& opts) {
    const SignatureDb db = load_db_or_fail(opts.sig_db_path);
    std::ostringstream out;
    std::map<std::string, std::size_t> counts;
    int errors = 0;

    for (const auto& path : expand_inputs(inputs)) {
        try {
            const MatchResult match = identify_packer(parse_pe(read_binary(path)), db);
            const std::string name = match.matched() ? *match.packer_name : "UNKNOWN";
            out << path << "\t" << name << "\n";
            ++counts[name];
        } catch (const std::exception& e) {
            std::cerr << path << ": " << e.what() << "\n";
            ++errors;
        }
    }
    std::vector<std::pair<std::string, std::size_t>> table(counts.begin(), counts.end());
    std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    out << "\n";
    for (const auto& [name, count] : table) out << count << "\t" << name << "\n";
    write_text(opts.out, out.str());
    return errors == 0 ? 0 : 1;
}

int cmd_pipeline(const std::vector<std::string>& inputs, std::size_t top_k, double ratio,
                 const CommonOptions& opts) {
    const SignatureDb db = load_db_or_fail(opts.sig_db_path);
    PipelineConfig cfg;
    cfg.labeling = make_labeling(opts, &db);
    cfg.top_k = top_k;
    cfg.split_ratio = ratio;
    cfg.rng_seed = opts.seed;

    const RunReport report = run_pipeline(expand_inputs(inputs), cfg);
    write_text(opts.out, render_report(report));
    return report.errors.empty() ? 0 : 1;
}

int cmd_synth(const std::string& spec_path, const CommonOptions& opts) {
    std::ifstream f(spec_path);
    if (!f) throw Error("cannot open '" + spec_path + "'");
    json j;
    f >> j;
    const auto bytes = build_synthetic_pe(parse_synth_spec(j));
    if (opts.out.empty()) throw Error("--out is required for synth");
    std::ofstream out(opts.out, std::ios::binary);
    if (!out) throw Error("cannot open '" + opts.out + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    std::cerr << "wrote " << bytes.size() << " bytes to " << opts.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"packtriage - packed-executable triage toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::vector<std::string> inputs;
    std::string dataset_path;
    std::string model_name = "random_forest";
    std::string method_name = "impurity";
    std::string classifier_name = "random_forest";
    std::string selection_path, features_csv, model_path, spec_path;
    std::size_t top_k = 20;
    double ratio = 0.70;

    auto* extract =
        app.add_subcommand("extract", "extract features and labels into a dataset CSV");
    extract->add_option("files", inputs, "PE files or directories")->required();
    add_common(extract, opts, true);

    auto* label = app.add_subcommand("label", "label files and print a class summary");
    label->add_option("files", inputs, "PE files or directories")->required();
    add_common(label, opts, true);

    auto* select = app.add_subcommand("select", "rank features by importance");
    select->add_option("--dataset", dataset_path, "dataset CSV")->required();
    select->add_option("--model", model_name,
                       "decision_tree|random_forest|extra_trees|boosted");
    select->add_option("--method", method_name, "impurity|permutation");
    select->add_option("--k", top_k, "number of features to keep");
    add_common(select, opts, false);

    auto* train_cmd =
        app.add_subcommand("train", "train a classifier into a model artifact");
    train_cmd->add_option("--dataset", dataset_path, "dataset CSV")->required();
    train_cmd->add_option("--classifier", classifier_name, "classifier kind");
    train_cmd->add_option("--selection", selection_path, "selection report file");
    train_cmd->add_option("--features", features_csv, "comma-separated feature ids");
    train_cmd->add_option("--k", top_k, "top-k features from --selection");
    add_common(train_cmd, opts, false);

    auto* classify = app.add_subcommand("classify", "classify files or dataset rows");
    classify->add_option("--model", model_path, "model artifact")->required();
    classify->add_option("files", inputs, "PE files or directories");
    classify->add_option("--dataset", dataset_path, "dataset CSV instead of files");
    add_common(classify, opts, false);

    auto* identify = app.add_subcommand("identify", "identify packers by signature");
    identify->add_option("files", inputs, "PE files or directories")->required();
    add_common(identify, opts, true);

    auto* pipeline = app.add_subcommand("pipeline", "run the full three-step pipeline");
    pipeline->add_option("files", inputs, "PE files or directories")->required();
    pipeline->add_option("--top-k", top_k, "features per selection");
    pipeline->add_option("--ratio", ratio, "train split ratio");
    add_common(pipeline, opts, true);

    auto* synth =
        app.add_subcommand("synth", "build a synthetic PE from a JSON description");
    synth->add_option("--spec", spec_path, "JSON description")->required();
    add_common(synth, opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    set_max_threads(opts.threads);

    try {
        if (extract->parsed()) return cmd_extract(inputs, opts);
        if (label->parsed()) return cmd_label(inputs, opts);
        if (select->parsed())
            return cmd_select(dataset_path, model_name, method_name, top_k, opts);
        if (train_cmd->parsed())
            return cmd_train(dataset_path, classifier_name, selection_path, features_csv,
                             top_k, opts);
        if (classify->parsed())
            return cmd_classify(model_path, inputs, dataset_path, opts);
        if (identify->parsed()) return cmd_identify(inputs, opts);
        if (pipeline->parsed()) return cmd_pipeline(inputs, top_k, ratio, opts);
        if (synth->parsed()) return cmd_synth(spec_path, opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
