#include "packtriage/synth.hpp"

#include "packtriage/errors.hpp"
#include "packtriage/rng.hpp"

#include <cstring>

namespace packtriage {

namespace {

constexpr std::uint32_t kFileAlign = 0x200;
constexpr std::uint32_t kSectionAlign = 0x1000;
constexpr std::uint32_t kPeOffset = 0x40;
constexpr std::uint32_t kOptionalSize = 224;
constexpr std::uint32_t kImageBase = 0x400000;

std::uint32_t align_up(std::uint32_t v, std::uint32_t a) {
    return (v + a - 1) / a * a;
}

void put16(std::vector<std::uint8_t>& b, std::size_t off, std::uint16_t v) {
    b[off] = std::uint8_t(v);
    b[off + 1] = std::uint8_t(v >> 8);
}

void put32(std::vector<std::uint8_t>& b, std::size_t off, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[off + i] = std::uint8_t(v >> (8 * i));
}

std::vector<std::uint8_t> section_bytes(const SyntheticSection& s) {
    std::vector<std::uint8_t> bytes(s.raw_size, 0);
    switch (s.content.kind) {
    case SectionContent::Kind::ZeroFill: break;
    case SectionContent::Kind::RepeatByte:
        std::fill(bytes.begin(), bytes.end(), s.content.byte);
        break;
    case SectionContent::Kind::UniformRandom: {
        Rng rng(s.content.seed);
        for (auto& b : bytes) b = rng.next_byte();
        break;
    }
    case SectionContent::Kind::Literal:
        if (s.content.bytes.size() > s.raw_size)
            throw SynthError("literal content for '" + s.name +
                             "' longer than its raw size");
        std::copy(s.content.bytes.begin(), s.content.bytes.end(), bytes.begin());
        break;
    }
    return bytes;
}

struct ImportBlob {
    std::vector<std::uint8_t> bytes;
    std::uint32_t dir_rva = 0; // == file offset, header region maps identity
};

ImportBlob build_import_blob(const SyntheticPeSpec& spec, std::uint32_t blob_offset) {
    ImportBlob blob;
    if (spec.import_dlls == 0) {
        if (spec.import_symbols > 0)
            throw SynthError("import symbols require at least one DLL");
        return blob;
    }

    const std::uint32_t n_dlls = spec.import_dlls;
    std::vector<std::uint32_t> per_dll(n_dlls, spec.import_symbols / n_dlls);
    for (std::uint32_t i = 0; i < spec.import_symbols % n_dlls; ++i) ++per_dll[i];

    const std::uint32_t desc_bytes = 20 * (n_dlls + 1);
    std::uint32_t thunk_bytes = 0;
    for (std::uint32_t c : per_dll) thunk_bytes += 4 * (c + 1);
    const std::uint32_t name_bytes = 8 * n_dlls;
    blob.bytes.assign(desc_bytes + thunk_bytes + name_bytes, 0);
    blob.dir_rva = blob_offset;

    std::uint32_t thunk_off = desc_bytes;
    std::uint32_t name_off = desc_bytes + thunk_bytes;
    for (std::uint32_t d = 0; d < n_dlls; ++d) {
        const std::size_t desc = std::size_t{d} * 20;
        put32(blob.bytes, desc + 0, blob_offset + thunk_off);  // OriginalFirstThunk
        put32(blob.bytes, desc + 12, blob_offset + name_off);  // Name
        put32(blob.bytes, desc + 16, blob_offset + thunk_off); // FirstThunk
        for (std::uint32_t s = 0; s < per_dll[d]; ++s)
            put32(blob.bytes, thunk_off + 4 * std::size_t{s},
                  0x80000000u | (d * 1000 + s + 1)); // import by ordinal
        thunk_off += 4 * (per_dll[d] + 1);

        const std::string name = "d" + std::to_string(d) + ".dll";
        std::memcpy(blob.bytes.data() + name_off, name.c_str(), name.size() + 1);
        name_off += 8;
    }
    return blob;
}

} // namespace

std::vector<std::uint8_t> build_synthetic_pe(const SyntheticPeSpec& spec) {
    for (const auto& s : spec.sections)
        if (s.name.size() > 8)
            throw SynthError("section name '" + s.name + "' longer than 8 bytes");

    const std::uint32_t n = static_cast<std::uint32_t>(spec.sections.size());
    const std::uint32_t section_table = kPeOffset + 4 + 20 + kOptionalSize;
    const std::uint32_t blob_offset = section_table + 40 * n;

    const ImportBlob imports = build_import_blob(spec, blob_offset);
    const std::uint32_t headers_end =
        blob_offset + static_cast<std::uint32_t>(imports.bytes.size());
    const std::uint32_t size_of_headers = align_up(headers_end, kFileAlign);
    if (!spec.sections.empty() && headers_end > kSectionAlign)
        throw SynthError("headers and import table exceed the first section address");

    // lay out virtual and raw ranges
    struct Layout {
        std::uint32_t va, vsize, raw_offset;
    };
    std::vector<Layout> layout(n);
    std::uint32_t va = kSectionAlign;
    std::uint32_t raw = size_of_headers;
    std::uint32_t data_end = size_of_headers;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto& s = spec.sections[i];
        layout[i].va = va;
        layout[i].vsize = s.raw_size > 0 ? s.raw_size : kSectionAlign;
        layout[i].raw_offset = s.raw_size > 0 ? raw : 0;
        va = align_up(va + std::max(layout[i].vsize, s.raw_size), kSectionAlign);
        if (s.raw_size > 0) {
            data_end = raw + s.raw_size;
            raw += align_up(s.raw_size, kFileAlign);
        }
    }
    const std::uint32_t image_end = va;

    std::uint32_t entry_rva = 0;
    if (spec.entry.out_of_range) {
        entry_rva = image_end + 0x10000;
    } else {
        bool found = false;
        for (std::uint32_t i = 0; i < n; ++i) {
            if (spec.sections[i].name != spec.entry.section) continue;
            const std::uint32_t span =
                std::max(layout[i].vsize, spec.sections[i].raw_size);
            if (spec.entry.offset >= span)
                throw SynthError("entry offset outside section '" + spec.entry.section +
                                 "'");
            entry_rva = layout[i].va + spec.entry.offset;
            found = true;
            break;
        }
        if (!found)
            throw SynthError("entry section '" + spec.entry.section + "' not defined");
    }

    // the file ends at the last data byte; trailing bytes are the overlay
    std::vector<std::uint8_t> image(std::size_t{data_end} + spec.overlay_size, 0);

    // DOS header
    image[0] = 'M';
    image[1] = 'Z';
    put32(image, 0x3C, kPeOffset);

    // PE signature + COFF header
    std::memcpy(image.data() + kPeOffset, "PE\0\0", 4);
    const std::size_t coff = kPeOffset + 4;
    put16(image, coff + 0, 0x014C); // i386
    put16(image, coff + 2, std::uint16_t(n));
    put16(image, coff + 16, std::uint16_t(kOptionalSize));
    put16(image, coff + 18, 0x0102); // executable, 32-bit

    // optional header (PE32)
    const std::size_t opt = coff + 20;
    put16(image, opt + 0, 0x10B);
    put32(image, opt + 16, entry_rva);
    put32(image, opt + 20, n > 0 ? layout[0].va : kSectionAlign); // BaseOfCode
    put32(image, opt + 28, kImageBase);
    put32(image, opt + 32, kSectionAlign);
    put32(image, opt + 36, kFileAlign);
    put16(image, opt + 48, 4); // MajorSubsystemVersion
    put32(image, opt + 56, image_end);
    put32(image, opt + 60, size_of_headers);
    put16(image, opt + 68, 3); // console subsystem
    put32(image, opt + 92, 16);
    const std::size_t dirs = opt + 96;
    if (imports.dir_rva != 0) {
        put32(image, dirs + 1 * 8, imports.dir_rva);
        put32(image, dirs + 1 * 8 + 4, std::uint32_t(imports.bytes.size()));
    }
    if (spec.tls) {
        put32(image, dirs + 9 * 8, 0x10000000); // marker only, never dereferenced
        put32(image, dirs + 9 * 8 + 4, 0x18);
    }

    // section table and raw data
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto& s = spec.sections[i];
        const std::size_t row = section_table + std::size_t{i} * 40;
        std::memcpy(image.data() + row, s.name.data(), s.name.size());
        put32(image, row + 8, layout[i].vsize);
        put32(image, row + 12, layout[i].va);
        put32(image, row + 16, s.raw_size);
        put32(image, row + 20, layout[i].raw_offset);
        put32(image, row + 36, s.characteristics);
        if (s.raw_size > 0) {
            const auto bytes = section_bytes(s);
            std::copy(bytes.begin(), bytes.end(), image.begin() + layout[i].raw_offset);
        }
    }

    if (!imports.bytes.empty())
        std::copy(imports.bytes.begin(), imports.bytes.end(),
                  image.begin() + blob_offset);
    return image;
}

} // namespace packtriage
