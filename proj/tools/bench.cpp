// Times the serial reference path against the OpenMP kernels and verifies
// that both produce identical results.

#include "packtriage/entropy.hpp"
#include "packtriage/importance.hpp"
#include "packtriage/parallel.hpp"
#include "packtriage/pipeline.hpp"
#include "packtriage/rng.hpp"
#include "packtriage/synth.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace packtriage;

namespace {

double seconds(std::function<void()> fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(stop - start).count();
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name,
                serial, parallel, parallel > 0 ? serial / parallel : 0.0,
                identical ? "identical" : "MISMATCH");
}

Dataset benchmark_dataset(std::size_t rows, std::uint64_t seed) {
    Dataset ds;
    for (int f = 0; f < 16; ++f)
        ds.catalog.entries.push_back({"f" + std::to_string(f), FeatureKind::Numeric, {}});
    ds.class_names = {"a", "b", "c"};
    Rng rng(seed);
    for (std::size_t i = 0; i < rows; ++i) {
        FeatureVector row;
        for (int f = 0; f < 16; ++f) row.values.push_back(rng.uniform_double());
        const double key = row.values[0] + 0.3 * row.values[1];
        ds.rows.push_back(std::move(row));
        ds.labels.push_back(key < 0.45 ? 0 : key < 0.9 ? 1 : 2);
    }
    return ds;
}

} // namespace

int main(int argc, char** argv) {
    const std::size_t scale = argc > 1 ? std::stoul(argv[1]) : 1;
    std::printf("threads available: %d\n\n", max_threads());

    {
        std::vector<std::uint8_t> buffer((64 << 20) * scale);
        Rng rng(1);
        for (auto& b : buffer) b = rng.next_byte();
        double h_serial = 0, h_parallel = 0;
        const double ts = seconds([&] { h_serial = shannon_entropy_serial(buffer); });
        set_max_threads(0);
        const double tp = seconds([&] { h_parallel = shannon_entropy(buffer); });
        report("entropy 64 MiB", ts, tp, h_serial == h_parallel);
    }

    {
        const Dataset ds = benchmark_dataset(4000 * scale, 2);
        TreeParams params;
        params.features_per_node = FeatureSampling::Sqrt;
        params.rng_seed = 3;
        std::string serial_model, parallel_model;
        set_max_threads(1);
        const double ts = seconds([&] {
            ModelArtifact a;
            ClassifierSpec spec;
            spec.kind = ClassifierKind::RandomForest;
            spec.n_trees = 60;
            spec.tree_params = params;
            std::vector<std::string> ids;
            for (const auto& e : ds.catalog.entries) ids.push_back(e.id);
            a.model = train(spec, ds, ids);
            serial_model = render_model(a);
        });
        set_max_threads(0);
        const double tp = seconds([&] {
            ModelArtifact a;
            ClassifierSpec spec;
            spec.kind = ClassifierKind::RandomForest;
            spec.n_trees = 60;
            spec.tree_params = params;
            std::vector<std::string> ids;
            for (const auto& e : ds.catalog.entries) ids.push_back(e.id);
            a.model = train(spec, ds, ids);
            parallel_model = render_model(a);
        });
        report("random forest 60 trees", ts, tp, serial_model == parallel_model);
    }

    {
        const Dataset train_ds = benchmark_dataset(2000 * scale, 4);
        const Dataset heldout = benchmark_dataset(800 * scale, 5);
        TreeParams params;
        params.features_per_node = FeatureSampling::Sqrt;
        const EnsembleModel forest = train_random_forest(train_ds, 40, params);
        std::string serial_report, parallel_report;
        set_max_threads(1);
        const double ts = seconds([&] {
            serial_report = render_selection(permutation_importance(forest, heldout, 5, 6));
        });
        set_max_threads(0);
        const double tp = seconds([&] {
            parallel_report =
                render_selection(permutation_importance(forest, heldout, 5, 6));
        });
        report("permutation importance", ts, tp, serial_report == parallel_report);
    }

    {
        // corpus extraction over in-memory images written to temp files
        std::vector<SyntheticPeSpec> specs;
        for (std::size_t i = 0; i < 400 * scale; ++i) {
            SyntheticPeSpec spec;
            spec.sections.push_back(
                {".text", 8192, 0x60000020, SectionContent::random(i)});
            spec.entry = {".text", 0, false};
            specs.push_back(std::move(spec));
        }
        std::vector<std::vector<std::uint8_t>> images;
        for (const auto& spec : specs) images.push_back(build_synthetic_pe(spec));

        const FeatureCatalog catalog = default_catalog();
        auto extract_all = [&] {
            std::vector<FeatureVector> rows(images.size());
            parallel_for(images.size(), [&](std::size_t i) {
                rows[i] = extract_features(parse_pe(images[i]), catalog);
            });
            return rows;
        };
        std::vector<FeatureVector> serial_rows, parallel_rows;
        set_max_threads(1);
        const double ts = seconds([&] { serial_rows = extract_all(); });
        set_max_threads(0);
        const double tp = seconds([&] { parallel_rows = extract_all(); });
        bool same = serial_rows.size() == parallel_rows.size();
        for (std::size_t i = 0; same && i < serial_rows.size(); ++i)
            same = serial_rows[i] == parallel_rows[i];
        report("feature extraction x400", ts, tp, same);
    }

    set_max_threads(0);
    return 0;
}
