#ifndef PACKTRIAGE_LABELING_HPP
#define PACKTRIAGE_LABELING_HPP

#include "packtriage/pe_file.hpp"
#include "packtriage/signatures.hpp"

#include <array>
#include <string>
#include <vector>

namespace packtriage {

enum class PackLabel { NotPacked, CustomPacked, WellKnownPacked };

constexpr std::array<PackLabel, 3> kAllPackLabels = {
    PackLabel::NotPacked, PackLabel::CustomPacked, PackLabel::WellKnownPacked};

std::string pack_label_name(PackLabel label);

struct LabelingConfig {
    double packing_range_low = 7.0; // closed interval on entry-section entropy
    double packing_range_high = 8.0;
    const SignatureDb* signature_db = nullptr;
};

/// Ground-truth rule, evaluated strictly in order:
///  1. no usable entry section            -> CustomPacked
///  2. a signature matches                -> WellKnownPacked
///  3. entry section writable and its raw-byte entropy falls inside the
///     packing range (closed interval)    -> CustomPacked
///  4. otherwise                          -> NotPacked
PackLabel label_file(const PeFile& pe, const LabelingConfig& cfg);

struct CorpusLabel {
    std::string path;
    PackLabel label = PackLabel::NotPacked;
};

struct CorpusError {
    std::string path;
    std::string message;
};

struct CorpusLabels {
    std::vector<CorpusLabel> labels;           // input order, parse failures skipped
    std::vector<CorpusError> errors;           // input order
    std::array<std::size_t, 3> class_counts{}; // indexed by PackLabel

    std::size_t total_labeled() const {
        return class_counts[0] + class_counts[1] + class_counts[2];
    }
};

/// Labels every readable PE in `paths`; files that fail to parse land in
/// `errors` with the reason instead of a label. Runs file-parallel with
/// deterministic, input-ordered output.
CorpusLabels label_corpus(const std::vector<std::string>& paths,
                          const LabelingConfig& cfg);

/// Table-like rendering of per-class counts and percentages.
std::string render_label_summary(const CorpusLabels& labels);

} // namespace packtriage

#endif
