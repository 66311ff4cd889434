#ifndef PACKTRIAGE_FEATURES_HPP
#define PACKTRIAGE_FEATURES_HPP

#include "packtriage/pe_file.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace packtriage {

enum class FeatureKind { Numeric, Boolean, Categorical };

struct CatalogEntry {
    std::string id;
    FeatureKind kind = FeatureKind::Numeric;
    std::vector<std::string> categories; // categorical only, declared order

    bool operator==(const CatalogEntry&) const = default;
};

struct FeatureCatalog {
    std::vector<CatalogEntry> entries;

    std::size_t size() const { return entries.size(); }
    std::optional<std::size_t> index_of(std::string_view id) const;

    bool operator==(const FeatureCatalog&) const = default;
};

/// One cell per catalog entry: numeric cells are finite reals, booleans are
/// 0/1, categorical cells hold the category index.
struct FeatureVector {
    std::vector<double> values;

    bool operator==(const FeatureVector&) const = default;
};

struct Dataset {
    FeatureCatalog catalog;
    std::vector<FeatureVector> rows;
    std::vector<int> labels; // index into class_names, same length as rows
    std::vector<std::string> class_names;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_features() const { return catalog.size(); }
    std::size_t n_classes() const { return class_names.size(); }
    double value(std::size_t row, std::size_t col) const { return rows[row].values[col]; }

    bool operator==(const Dataset&) const = default;
};

/// The fixed 24-entry catalog the extractor fills, in documented order.
FeatureCatalog default_catalog();

/// Computes one cell per catalog entry. Missing structures use a paired
/// sentinel: the value cell reads 0 and the matching presence boolean
/// (has_eps, has_text_section) reads 0, so every learner sees dense data.
/// Accepts the default catalog or any subset of it.
FeatureVector extract_features(const PeFile& pe, const FeatureCatalog& catalog);

/// CSV with a `#classes:a|b|...` line, a feature-id header line, then one
/// row per line: cells in catalog order followed by the label name.
/// Numerics print losslessly; booleans as 0/1; categoricals by name.
void save_dataset_csv(const Dataset& ds, std::ostream& out);
void save_dataset_csv(const Dataset& ds, const std::string& path);

/// Loads against an expected catalog. Throws CsvError: SchemaMismatch when
/// the header ids differ from the catalog, BadCell for non-finite numerics,
/// unknown categories, or unknown labels.
Dataset load_dataset_csv(std::istream& in, const FeatureCatalog& catalog);
Dataset load_dataset_csv(const std::string& path, const FeatureCatalog& catalog);

} // namespace packtriage

#endif
