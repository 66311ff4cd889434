#ifndef PACKTRIAGE_PE_FILE_HPP
#define PACKTRIAGE_PE_FILE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace packtriage {

constexpr std::uint32_t kSectionMemExecute = 0x20000000u;
constexpr std::uint32_t kSectionMemWrite = 0x80000000u;

struct SectionHeader {
    std::array<std::uint8_t, 8> name_bytes{}; // raw, NUL-padded
    std::uint32_t virtual_size = 0;
    std::uint32_t virtual_address = 0;
    std::uint32_t raw_size = 0;
    std::uint32_t raw_offset = 0;
    std::uint32_t characteristics = 0;

    /// Name up to the first NUL. The raw 8 bytes stay available above.
    std::string name() const;

    bool writable() const { return (characteristics & kSectionMemWrite) != 0; }
    bool executable() const { return (characteristics & kSectionMemExecute) != 0; }

    /// Section span used for RVA containment: packed files routinely zero
    /// one of the two sizes, so the larger one wins.
    std::uint32_t virtual_span() const {
        return virtual_size > raw_size ? virtual_size : raw_size;
    }
    bool contains_rva(std::uint32_t rva) const {
        return rva >= virtual_address &&
               rva - virtual_address < virtual_span();
    }
};

/// Parsed PE image. Immutable after parse_pe; safe to share across threads.
struct PeFile {
    std::vector<std::uint8_t> raw_bytes;
    std::uint16_t machine = 0;
    std::uint16_t num_sections = 0;
    std::uint32_t entry_point_rva = 0;
    std::uint64_t image_base = 0;
    std::vector<SectionHeader> sections;
    std::uint32_t import_dll_count = 0;
    std::uint32_t import_symbol_count = 0;
    bool has_tls = false;
    std::uint64_t overlay_size = 0;
    bool is_pe32_plus = false;

    std::span<const std::uint8_t> section_raw_bytes(const SectionHeader& s) const {
        if (s.raw_size == 0) return {};
        return std::span<const std::uint8_t>(raw_bytes).subspan(s.raw_offset, s.raw_size);
    }
};

struct EntryPointInfo {
    std::optional<std::size_t> section_index;
    std::uint32_t offset_in_section = 0;       // meaningful only when section_index is set
    std::vector<std::uint8_t> ep_bytes;        // section raw bytes from the entry point onward
};

/// Parses little-endian PE32 / PE32+ headers and the section table.
/// Throws PeError (MissingMzMagic, MissingPeSignature, Truncated).
/// Directories other than import and TLS are ignored; a malformed import
/// table yields zero counts rather than an error.
PeFile parse_pe(std::span<const std::uint8_t> bytes);

/// First section whose virtual range contains the entry point RVA and whose
/// raw size is nonzero; absence is a value, not an error.
EntryPointInfo resolve_entry_section(const PeFile& pe);

} // namespace packtriage

#endif
