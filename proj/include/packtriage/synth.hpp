#ifndef PACKTRIAGE_SYNTH_HPP
#define PACKTRIAGE_SYNTH_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace packtriage {

/// How a synthetic section's raw data is filled.
struct SectionContent {
    enum class Kind { ZeroFill, RepeatByte, UniformRandom, Literal };

    Kind kind = Kind::ZeroFill;
    std::uint8_t byte = 0;            // RepeatByte
    std::uint64_t seed = 0;           // UniformRandom
    std::vector<std::uint8_t> bytes;  // Literal; zero-padded up to raw_size

    static SectionContent zero_fill() { return {}; }
    static SectionContent repeat(std::uint8_t b) {
        return {Kind::RepeatByte, b, 0, {}};
    }
    static SectionContent random(std::uint64_t seed) {
        return {Kind::UniformRandom, 0, seed, {}};
    }
    static SectionContent literal(std::vector<std::uint8_t> bytes) {
        return {Kind::Literal, 0, 0, std::move(bytes)};
    }
};

struct SyntheticSection {
    std::string name; // at most 8 bytes
    std::uint32_t raw_size = 0;
    std::uint32_t characteristics = 0;
    SectionContent content;
};

struct SyntheticEntry {
    std::string section; // empty + out_of_range designates a hidden entry point
    std::uint32_t offset = 0;
    bool out_of_range = false;
};

/// Description of a minimal, structurally valid PE32 image. The import
/// table must fit in the header region below the first section.
struct SyntheticPeSpec {
    std::vector<SyntheticSection> sections;
    SyntheticEntry entry;
    std::uint32_t import_dlls = 0;
    std::uint32_t import_symbols = 0;
    bool tls = false;              // sets the TLS directory marker only
    std::uint32_t overlay_size = 0; // zero-filled bytes appended past the last section
};

/// Emits the image bytes. Throws SynthError on an invalid description
/// (unknown entry section, oversized name, import table that cannot fit).
std::vector<std::uint8_t> build_synthetic_pe(const SyntheticPeSpec& spec);

} // namespace packtriage

#endif
