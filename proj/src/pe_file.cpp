#include "packtriage/pe_file.hpp"

#include "packtriage/errors.hpp"

#include <algorithm>
#include <cstring>

namespace packtriage {

namespace {

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8(std::size_t off) const {
        check(off, 1);
        return bytes_[off];
    }
    std::uint16_t u16(std::size_t off) const {
        check(off, 2);
        return static_cast<std::uint16_t>(bytes_[off] | bytes_[off + 1] << 8);
    }
    std::uint32_t u32(std::size_t off) const {
        check(off, 4);
        return static_cast<std::uint32_t>(bytes_[off]) |
               static_cast<std::uint32_t>(bytes_[off + 1]) << 8 |
               static_cast<std::uint32_t>(bytes_[off + 2]) << 16 |
               static_cast<std::uint32_t>(bytes_[off + 3]) << 24;
    }
    std::uint64_t u64(std::size_t off) const {
        return static_cast<std::uint64_t>(u32(off)) |
               static_cast<std::uint64_t>(u32(off + 4)) << 32;
    }
    std::size_t size() const { return bytes_.size(); }

private:
    void check(std::size_t off, std::size_t len) const {
        if (off + len > bytes_.size() || off + len < off)
            throw PeError(PeError::Code::Truncated,
                          "header field at offset " + std::to_string(off) +
                              " extends past end of file");
    }

    std::span<const std::uint8_t> bytes_;
};

// Translates an RVA to a file offset; the region below the first section's
// virtual address maps identity (headers). Returns nullopt when unmapped.
std::optional<std::size_t> rva_to_offset(const PeFile& pe, std::uint32_t rva) {
    std::uint32_t min_va = ~std::uint32_t{0};
    for (const auto& s : pe.sections) {
        if (s.raw_size == 0) continue;
        min_va = std::min(min_va, s.virtual_address);
        if (s.contains_rva(rva)) {
            const std::uint32_t delta = rva - s.virtual_address;
            if (delta >= s.raw_size) return std::nullopt;
            return static_cast<std::size_t>(s.raw_offset) + delta;
        }
    }
    if (rva < min_va && rva < pe.raw_bytes.size()) return rva;
    return std::nullopt;
}

// Counts import descriptors and their thunks. Best effort: anything out of
// bounds simply stops the walk.
void parse_imports(PeFile& pe, std::uint32_t dir_rva) {
    if (dir_rva == 0) return;
    const std::size_t thunk_size = pe.is_pe32_plus ? 8 : 4;
    const Reader r(pe.raw_bytes);
    auto desc_off = rva_to_offset(pe, dir_rva);
    if (!desc_off) return;

    for (std::size_t off = *desc_off;; off += 20) {
        if (off + 20 > pe.raw_bytes.size()) break;
        const std::uint32_t original_first_thunk = r.u32(off);
        const std::uint32_t name_rva = r.u32(off + 12);
        const std::uint32_t first_thunk = r.u32(off + 16);
        if (original_first_thunk == 0 && name_rva == 0 && first_thunk == 0) break;
        ++pe.import_dll_count;

        const std::uint32_t thunks_rva =
            original_first_thunk != 0 ? original_first_thunk : first_thunk;
        auto thunk_off = rva_to_offset(pe, thunks_rva);
        if (!thunk_off) continue;
        for (std::size_t t = *thunk_off; t + thunk_size <= pe.raw_bytes.size();
             t += thunk_size) {
            const std::uint64_t entry = pe.is_pe32_plus ? r.u64(t) : r.u32(t);
            if (entry == 0) break;
            ++pe.import_symbol_count;
        }
    }
}

} // namespace

std::string SectionHeader::name() const {
    std::size_t len = 0;
    while (len < name_bytes.size() && name_bytes[len] != 0) ++len;
    return std::string(reinterpret_cast<const char*>(name_bytes.data()), len);
}

PeFile parse_pe(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 0x4D || bytes[1] != 0x5A)
        throw PeError(PeError::Code::MissingMzMagic, "input does not start with MZ");

    const Reader r(bytes);
    const std::uint32_t pe_offset = r.u32(0x3C);
    if (pe_offset + 4 > bytes.size() ||
        std::memcmp(bytes.data() + pe_offset, "PE\0\0", 4) != 0)
        throw PeError(PeError::Code::MissingPeSignature,
                      "e_lfanew does not point at a PE signature");

    PeFile pe;
    pe.raw_bytes.assign(bytes.begin(), bytes.end());

    const std::size_t coff = pe_offset + 4;
    pe.machine = r.u16(coff);
    pe.num_sections = r.u16(coff + 2);
    const std::uint16_t optional_size = r.u16(coff + 16);

    const std::size_t opt = coff + 20;
    const std::uint16_t magic = r.u16(opt);
    if (magic == 0x20B)
        pe.is_pe32_plus = true;
    else if (magic != 0x10B)
        throw PeError(PeError::Code::Truncated,
                      "unknown optional header magic " + std::to_string(magic));

    pe.entry_point_rva = r.u32(opt + 16);
    pe.image_base = pe.is_pe32_plus ? r.u64(opt + 24) : r.u32(opt + 28);

    const std::size_t dir_count_off = opt + (pe.is_pe32_plus ? 108 : 92);
    std::uint32_t import_rva = 0;
    if (dir_count_off + 4 <= opt + optional_size) {
        const std::uint32_t n_dirs = r.u32(dir_count_off);
        const std::size_t dirs = dir_count_off + 4;
        if (n_dirs > 1 && dirs + 2 * 8 <= opt + optional_size)
            import_rva = r.u32(dirs + 1 * 8);
        if (n_dirs > 9 && dirs + 10 * 8 <= opt + optional_size)
            pe.has_tls = r.u32(dirs + 9 * 8) != 0;
    }

    const std::size_t section_table = opt + optional_size;
    pe.sections.reserve(pe.num_sections);
    for (std::uint16_t i = 0; i < pe.num_sections; ++i) {
        const std::size_t off = section_table + std::size_t{i} * 40;
        if (off + 40 > bytes.size())
            throw PeError(PeError::Code::Truncated, "section table extends past end of file");
        SectionHeader s;
        std::memcpy(s.name_bytes.data(), bytes.data() + off, 8);
        s.virtual_size = r.u32(off + 8);
        s.virtual_address = r.u32(off + 12);
        s.raw_size = r.u32(off + 16);
        s.raw_offset = r.u32(off + 20);
        s.characteristics = r.u32(off + 36);
        if (s.raw_size > 0) {
            const std::uint64_t end =
                std::uint64_t{s.raw_offset} + std::uint64_t{s.raw_size};
            if (end > bytes.size())
                throw PeError(PeError::Code::Truncated,
                              "section '" + s.name() + "' raw data extends past end of file");
        }
        pe.sections.push_back(s);
    }

    std::uint64_t max_raw_end = 0;
    for (const auto& s : pe.sections)
        max_raw_end = std::max(max_raw_end,
                               std::uint64_t{s.raw_offset} + std::uint64_t{s.raw_size});
    if (!pe.sections.empty() && bytes.size() > max_raw_end)
        pe.overlay_size = bytes.size() - max_raw_end;

    parse_imports(pe, import_rva);
    return pe;
}

EntryPointInfo resolve_entry_section(const PeFile& pe) {
    EntryPointInfo info;
    for (std::size_t i = 0; i < pe.sections.size(); ++i) {
        const auto& s = pe.sections[i];
        if (s.raw_size == 0 || !s.contains_rva(pe.entry_point_rva)) continue;
        info.section_index = i;
        info.offset_in_section = pe.entry_point_rva - s.virtual_address;
        if (info.offset_in_section < s.raw_size) {
            const auto raw = pe.section_raw_bytes(s);
            info.ep_bytes.assign(raw.begin() + info.offset_in_section, raw.end());
        }
        break;
    }
    return info;
}

} // namespace packtriage
