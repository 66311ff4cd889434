#include "packtriage/features.hpp"

#include "packtriage/entropy.hpp"
#include "packtriage/errors.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>

namespace packtriage {

namespace {

const std::array<std::string_view, 9> kStandardSectionNames = {
    ".text", ".data", ".rdata", ".bss", ".idata",
    ".edata", ".rsrc", ".reloc", ".tls"};

bool is_standard_section(const std::string& name) {
    for (auto s : kStandardSectionNames)
        if (name == s) return true;
    return false;
}

// Per-file values the individual feature rules read; computed once.
struct PeFacts {
    const PeFile& pe;
    EntryPointInfo ep;
    std::vector<double> section_entropy; // -1 for raw_size == 0
    double file_entropy = 0;

    explicit PeFacts(const PeFile& p) : pe(p), ep(resolve_entry_section(p)) {
        section_entropy.reserve(pe.sections.size());
        for (const auto& s : pe.sections)
            section_entropy.push_back(
                s.raw_size == 0 ? -1.0 : shannon_entropy(pe.section_raw_bytes(s)));
        file_entropy = shannon_entropy(pe.raw_bytes);
    }

    const SectionHeader* ep_section() const {
        return ep.section_index ? &pe.sections[*ep.section_index] : nullptr;
    }
    double ep_section_entropy() const {
        return ep.section_index ? section_entropy[*ep.section_index] : 0.0;
    }
    std::optional<std::size_t> text_index() const {
        for (std::size_t i = 0; i < pe.sections.size(); ++i)
            if (pe.sections[i].name() == ".text") return i;
        return std::nullopt;
    }
};

using FeatureFn = std::function<double(const PeFacts&)>;

struct FeatureDef {
    CatalogEntry entry;
    FeatureFn compute;
};

double count_standard(const PeFacts& f) {
    double n = 0;
    for (const auto& s : f.pe.sections)
        if (is_standard_section(s.name())) ++n;
    return n;
}

const std::vector<FeatureDef>& feature_defs() {
    static const std::vector<FeatureDef> defs = [] {
        std::vector<FeatureDef> d;
        auto num = [&](std::string id, FeatureFn fn) {
            d.push_back({{std::move(id), FeatureKind::Numeric, {}}, std::move(fn)});
        };
        auto boolean = [&](std::string id, FeatureFn fn) {
            d.push_back({{std::move(id), FeatureKind::Boolean, {}}, std::move(fn)});
        };

        num("entropy_eps", [](const PeFacts& f) {
            const double e = f.ep_section_entropy();
            return e < 0 ? 0.0 : e;
        });
        num("entropy_text", [](const PeFacts& f) {
            auto i = f.text_index();
            if (!i || f.section_entropy[*i] < 0) return 0.0;
            return f.section_entropy[*i];
        });
        num("entropy_file", [](const PeFacts& f) { return f.file_entropy; });
        num("entropy_max_section", [](const PeFacts& f) {
            double best = 0;
            for (double e : f.section_entropy)
                if (e > best) best = e;
            return best;
        });
        num("num_sections", [](const PeFacts& f) { return double(f.pe.sections.size()); });
        num("num_standard_sections", count_standard);
        num("num_nonstandard_sections", [](const PeFacts& f) {
            return double(f.pe.sections.size()) - count_standard(f);
        });
        boolean("zero_raw_size", [](const PeFacts& f) {
            for (const auto& s : f.pe.sections)
                if (s.raw_size == 0) return 1.0;
            return 0.0;
        });
        boolean("eps_writable", [](const PeFacts& f) {
            const auto* s = f.ep_section();
            return s && s->writable() ? 1.0 : 0.0;
        });
        boolean("eps_executable", [](const PeFacts& f) {
            const auto* s = f.ep_section();
            return s && s->executable() ? 1.0 : 0.0;
        });
        num("num_write_exec_sections", [](const PeFacts& f) {
            double n = 0;
            for (const auto& s : f.pe.sections)
                if (s.writable() && s.executable()) ++n;
            return n;
        });
        boolean("has_text_section", [](const PeFacts& f) {
            return f.text_index() ? 1.0 : 0.0;
        });
        boolean("has_eps", [](const PeFacts& f) {
            return f.ep.section_index ? 1.0 : 0.0;
        });
        boolean("ep_in_first_section", [](const PeFacts& f) {
            return f.ep.section_index && *f.ep.section_index == 0 ? 1.0 : 0.0;
        });
        boolean("ep_in_last_section", [](const PeFacts& f) {
            return f.ep.section_index &&
                           *f.ep.section_index + 1 == f.pe.sections.size()
                       ? 1.0
                       : 0.0;
        });
        num("ratio_virtual_to_raw_of_eps", [](const PeFacts& f) {
            const auto* s = f.ep_section();
            if (!s || s->raw_size == 0) return 0.0;
            return double(s->virtual_size) / double(s->raw_size);
        });
        num("size_uninitialized_data", [](const PeFacts& f) {
            double total = 0;
            for (const auto& s : f.pe.sections)
                if (s.virtual_size > s.raw_size) total += s.virtual_size - s.raw_size;
            return total;
        });
        num("import_dll_count", [](const PeFacts& f) { return double(f.pe.import_dll_count); });
        num("import_symbol_count", [](const PeFacts& f) {
            return double(f.pe.import_symbol_count);
        });
        boolean("low_import_count", [](const PeFacts& f) {
            return f.pe.import_symbol_count < 10 ? 1.0 : 0.0;
        });
        boolean("has_tls", [](const PeFacts& f) { return f.pe.has_tls ? 1.0 : 0.0; });
        num("overlay_ratio", [](const PeFacts& f) {
            if (f.pe.raw_bytes.empty()) return 0.0;
            return double(f.pe.overlay_size) / double(f.pe.raw_bytes.size());
        });
        num("num_sections_entropy_above_7", [](const PeFacts& f) {
            double n = 0;
            for (double e : f.section_entropy)
                if (e > 7.0) ++n;
            return n;
        });
        num("file_size_log2", [](const PeFacts& f) {
            return f.pe.raw_bytes.empty() ? 0.0 : std::log2(double(f.pe.raw_bytes.size()));
        });
        return d;
    }();
    return defs;
}

std::string format_cell(double v, const CatalogEntry& entry) {
    switch (entry.kind) {
    case FeatureKind::Boolean:
        return v == 0.0 ? "0" : "1";
    case FeatureKind::Categorical:
        return entry.categories.at(static_cast<std::size_t>(v));
    case FeatureKind::Numeric: {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
    }
    return {};
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

} // namespace

std::optional<std::size_t> FeatureCatalog::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].id == id) return i;
    return std::nullopt;
}

FeatureCatalog default_catalog() {
    FeatureCatalog catalog;
    for (const auto& def : feature_defs()) catalog.entries.push_back(def.entry);
    return catalog;
}

FeatureVector extract_features(const PeFile& pe, const FeatureCatalog& catalog) {
    const PeFacts facts(pe);
    const auto& defs = feature_defs();

    FeatureVector out;
    out.values.reserve(catalog.size());
    for (const auto& entry : catalog.entries) {
        const FeatureDef* def = nullptr;
        for (const auto& d : defs)
            if (d.entry.id == entry.id) {
                def = &d;
                break;
            }
        if (!def)
            throw Error("unknown feature id '" + entry.id + "'");
        out.values.push_back(def->compute(facts));
    }
    return out;
}

void save_dataset_csv(const Dataset& ds, std::ostream& out) {
    out << "#classes:";
    for (std::size_t i = 0; i < ds.class_names.size(); ++i) {
        if (i) out << '|';
        out << ds.class_names[i];
    }
    out << '\n';
    for (std::size_t i = 0; i < ds.catalog.size(); ++i) {
        if (i) out << ',';
        out << ds.catalog.entries[i].id;
    }
    out << '\n';
    for (std::size_t r = 0; r < ds.rows.size(); ++r) {
        for (std::size_t c = 0; c < ds.catalog.size(); ++c)
            out << format_cell(ds.rows[r].values[c], ds.catalog.entries[c]) << ',';
        out << ds.class_names.at(ds.labels[r]) << '\n';
    }
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    save_dataset_csv(ds, f);
}

Dataset load_dataset_csv(std::istream& in, const FeatureCatalog& catalog) {
    Dataset ds;
    ds.catalog = catalog;

    std::string line;
    if (!std::getline(in, line) || !line.starts_with("#classes:"))
        throw CsvError(CsvError::Code::SchemaMismatch, "missing #classes: header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string names = line.substr(9);
    std::size_t pos = 0;
    while (true) {
        std::size_t bar = names.find('|', pos);
        if (bar == std::string::npos) {
            ds.class_names.push_back(names.substr(pos));
            break;
        }
        ds.class_names.push_back(names.substr(pos, bar - pos));
        pos = bar + 1;
    }

    if (!std::getline(in, line))
        throw CsvError(CsvError::Code::SchemaMismatch, "missing feature header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() != catalog.size())
        throw CsvError(CsvError::Code::SchemaMismatch,
                       "header has " + std::to_string(header.size()) + " ids, catalog has " +
                           std::to_string(catalog.size()));
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] != catalog.entries[i].id)
            throw CsvError(CsvError::Code::SchemaMismatch,
                           "header id '" + header[i] + "' != catalog id '" +
                               catalog.entries[i].id + "'");

    std::unordered_map<std::string, int> label_ids;
    for (std::size_t i = 0; i < ds.class_names.size(); ++i)
        label_ids[ds.class_names[i]] = static_cast<int>(i);

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != catalog.size() + 1)
            throw CsvError(CsvError::Code::BadCell,
                           "row has " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(catalog.size() + 1));
        FeatureVector row;
        row.values.reserve(catalog.size());
        for (std::size_t c = 0; c < catalog.size(); ++c) {
            const auto& entry = catalog.entries[c];
            const std::string& cell = cells[c];
            switch (entry.kind) {
            case FeatureKind::Numeric: {
                char* end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                if (end != cell.c_str() + cell.size() || cell.empty() || !std::isfinite(v))
                    throw CsvError(CsvError::Code::BadCell,
                                   "bad numeric cell '" + cell + "' for " + entry.id);
                row.values.push_back(v);
                break;
            }
            case FeatureKind::Boolean:
                if (cell == "0")
                    row.values.push_back(0);
                else if (cell == "1")
                    row.values.push_back(1);
                else
                    throw CsvError(CsvError::Code::BadCell,
                                   "bad boolean cell '" + cell + "' for " + entry.id);
                break;
            case FeatureKind::Categorical: {
                std::size_t idx = entry.categories.size();
                for (std::size_t k = 0; k < entry.categories.size(); ++k)
                    if (entry.categories[k] == cell) {
                        idx = k;
                        break;
                    }
                if (idx == entry.categories.size())
                    throw CsvError(CsvError::Code::BadCell,
                                   "unknown category '" + cell + "' for " + entry.id);
                row.values.push_back(static_cast<double>(idx));
                break;
            }
            }
        }
        auto it = label_ids.find(cells.back());
        if (it == label_ids.end())
            throw CsvError(CsvError::Code::BadCell, "unknown label '" + cells.back() + "'");
        ds.rows.push_back(std::move(row));
        ds.labels.push_back(it->second);
    }
    return ds;
}

Dataset load_dataset_csv(const std::string& path, const FeatureCatalog& catalog) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    return load_dataset_csv(f, catalog);
}

} // namespace packtriage
