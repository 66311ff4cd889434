#ifndef PACKTRIAGE_TESTS_FIXTURES_HPP
#define PACKTRIAGE_TESTS_FIXTURES_HPP

#include "packtriage/features.hpp"
#include "packtriage/signatures.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace testsupport {

inline std::string data_path(const std::string& name) {
    return std::string(TEST_DATA_DIR) + "/" + name;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream buffer;
    buffer << f.rdbuf();
    return buffer.str();
}

/// Catalog of the 14-row worked-example dataset. Categories are declared in
/// label-encoded (alphabetical) order and the columns in the order under
/// which the library's documented deterministic tie-breaks reproduce the
/// reference tree the golden tests check against.
inline packtriage::FeatureCatalog worked_example_catalog() {
    using packtriage::FeatureKind;
    packtriage::FeatureCatalog catalog;
    catalog.entries.push_back(
        {"num_standard_sections", FeatureKind::Categorical, {"0", "1", "2"}});
    catalog.entries.push_back(
        {"entropy_text", FeatureKind::Categorical, {"High", "Low", "Mid"}});
    catalog.entries.push_back(
        {"entropy_eps", FeatureKind::Categorical, {"High", "Low", "Mid"}});
    catalog.entries.push_back({"zero_raw_size", FeatureKind::Boolean, {}});
    return catalog;
}

inline packtriage::Dataset worked_example_dataset() {
    return packtriage::load_dataset_csv(data_path("packing_example.csv"),
                                        worked_example_catalog());
}

inline packtriage::SignatureDb sample_userdb() {
    return packtriage::parse_signature_db(read_text_file(data_path("sample_userdb.txt")));
}

inline packtriage::SignatureDb extended_userdb() {
    return packtriage::parse_signature_db(read_text_file(data_path("test_userdb.txt")));
}

} // namespace testsupport

#endif
