#include "packtriage/labeling.hpp"

#include "packtriage/entropy.hpp"
#include "packtriage/errors.hpp"
#include "packtriage/parallel.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

namespace packtriage {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

} // namespace

std::string pack_label_name(PackLabel label) {
    switch (label) {
    case PackLabel::NotPacked: return "Not Packed";
    case PackLabel::CustomPacked: return "Custom Packed";
    case PackLabel::WellKnownPacked: return "Well-known Packed";
    }
    return "?";
}

PackLabel label_file(const PeFile& pe, const LabelingConfig& cfg) {
    const EntryPointInfo ep = resolve_entry_section(pe);
    if (!ep.section_index) return PackLabel::CustomPacked;

    if (cfg.signature_db && identify_packer(pe, *cfg.signature_db).matched())
        return PackLabel::WellKnownPacked;

    const SectionHeader& section = pe.sections[*ep.section_index];
    if (section.writable()) {
        const double entropy = shannon_entropy(pe.section_raw_bytes(section));
        if (entropy >= cfg.packing_range_low && entropy <= cfg.packing_range_high)
            return PackLabel::CustomPacked;
    }
    return PackLabel::NotPacked;
}

CorpusLabels label_corpus(const std::vector<std::string>& paths,
                          const LabelingConfig& cfg) {
    struct PerFile {
        std::optional<PackLabel> label;
        std::string error;
    };
    std::vector<PerFile> results(paths.size());

    parallel_for(paths.size(), [&](std::size_t i) {
        try {
            const auto bytes = read_file(paths[i]);
            results[i].label = label_file(parse_pe(bytes), cfg);
        } catch (const std::exception& e) {
            results[i].error = e.what();
        }
    });

    CorpusLabels out;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (results[i].label) {
            out.labels.push_back({paths[i], *results[i].label});
            ++out.class_counts[static_cast<std::size_t>(*results[i].label)];
        } else {
            out.errors.push_back({paths[i], results[i].error});
        }
    }
    return out;
}

std::string render_label_summary(const CorpusLabels& labels) {
    const std::size_t total = labels.total_labeled();
    std::string out;
    char line[128];
    for (PackLabel label : kAllPackLabels) {
        const std::size_t count = labels.class_counts[static_cast<std::size_t>(label)];
        const double pct = total > 0 ? 100.0 * double(count) / double(total) : 0.0;
        std::snprintf(line, sizeof(line), "%-18s %8zu (%5.1f%%)\n",
                      pack_label_name(label).c_str(), count, pct);
        out += line;
    }
    std::snprintf(line, sizeof(line), "%-18s %8zu\n", "Total", total);
    out += line;
    if (!labels.errors.empty()) {
        std::snprintf(line, sizeof(line), "%-18s %8zu\n", "Unparseable",
                      labels.errors.size());
        out += line;
    }
    return out;
}

} // namespace packtriage
