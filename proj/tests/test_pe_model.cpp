#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "packtriage/entropy.hpp"
#include "packtriage/errors.hpp"
#include "packtriage/parallel.hpp"
#include "packtriage/pe_file.hpp"
#include "packtriage/rng.hpp"
#include "packtriage/synth.hpp"

#include <algorithm>
#include <cstring>

using namespace packtriage;

namespace {

SyntheticPeSpec three_section_spec() {
    SyntheticPeSpec spec;
    spec.sections.push_back({".text", 1024, 0x60000020, SectionContent::repeat(0x90)});
    spec.sections.push_back({".data", 512, 0xC0000040, SectionContent::zero_fill()});
    spec.sections.push_back({".rsrc", 256, 0x40000040, SectionContent::repeat(0x41)});
    spec.entry = {".text", 0x10, false};
    spec.import_dlls = 2;
    spec.import_symbols = 7;
    return spec;
}

// Minimal PE32+ image, built by hand since the synthetic builder emits PE32
// only.
std::vector<std::uint8_t> tiny_pe32_plus() {
    std::vector<std::uint8_t> image(0x400, 0);
    auto put16 = [&](std::size_t off, std::uint16_t v) {
        image[off] = std::uint8_t(v);
        image[off + 1] = std::uint8_t(v >> 8);
    };
    auto put32 = [&](std::size_t off, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) image[off + i] = std::uint8_t(v >> (8 * i));
    };
    image[0] = 'M';
    image[1] = 'Z';
    put32(0x3C, 0x40);
    std::memcpy(image.data() + 0x40, "PE\0\0", 4);
    const std::size_t coff = 0x44;
    put16(coff, 0x8664);
    put16(coff + 2, 1);   // one section
    put16(coff + 16, 240); // PE32+ optional header size
    const std::size_t opt = coff + 20;
    put16(opt, 0x20B);
    put32(opt + 16, 0x1000); // entry point
    put32(opt + 24, 0x40000000); // image base low half
    put32(opt + 28, 0x00000001); // image base high half
    put32(opt + 108, 16);
    // section ".x" at RVA 0x1000, raw 0x200 @ 0x200
    const std::size_t table = opt + 240;
    image[table] = '.';
    image[table + 1] = 'x';
    put32(table + 8, 0x200);
    put32(table + 12, 0x1000);
    put32(table + 16, 0x200);
    put32(table + 20, 0x200);
    put32(table + 36, 0x60000020);
    return image;
}

} // namespace

TEST_CASE("parse_pe round-trips a synthetic three-section image") {
    const auto bytes = build_synthetic_pe(three_section_spec());
    const PeFile pe = parse_pe(bytes);

    CHECK(pe.machine == 0x014C);
    CHECK(pe.num_sections == 3);
    REQUIRE(pe.sections.size() == 3);
    CHECK(pe.sections[0].name() == ".text");
    CHECK(pe.sections[1].name() == ".data");
    CHECK(pe.sections[2].name() == ".rsrc");
    CHECK(pe.sections[0].raw_size == 1024);
    CHECK(pe.sections[0].characteristics == 0x60000020);
    CHECK(pe.sections[1].characteristics == 0xC0000040);
    CHECK(pe.entry_point_rva == pe.sections[0].virtual_address + 0x10);
    CHECK(pe.image_base == 0x400000);
    CHECK(pe.import_dll_count == 2);
    CHECK(pe.import_symbol_count == 7);
    CHECK(pe.has_tls == false);
    CHECK(pe.overlay_size == 0);
    CHECK(pe.is_pe32_plus == false);

    const auto text = pe.section_raw_bytes(pe.sections[0]);
    CHECK(text.size() == 1024);
    CHECK(std::all_of(text.begin(), text.end(), [](auto b) { return b == 0x90; }));
}

TEST_CASE("parse_pe surfaces tls, overlay, and name bytes") {
    SyntheticPeSpec spec = three_section_spec();
    spec.tls = true;
    spec.overlay_size = 100;
    const PeFile pe = parse_pe(build_synthetic_pe(spec));
    CHECK(pe.has_tls);
    CHECK(pe.overlay_size == 100);

    // name() truncates at the first NUL while the raw bytes stay intact
    CHECK(pe.sections[0].name_bytes[5] == 0);
    CHECK(pe.sections[0].name_bytes[0] == '.');
}

TEST_CASE("parse_pe error paths") {
    SUBCASE("missing MZ magic") {
        const std::vector<std::uint8_t> bytes = {'X', 'X', 0, 0};
        CHECK_THROWS_AS(parse_pe(bytes), PeError);
        try {
            parse_pe(bytes);
        } catch (const PeError& e) {
            CHECK(e.code == PeError::Code::MissingMzMagic);
        }
    }
    SUBCASE("empty input") {
        CHECK_THROWS_AS(parse_pe(std::vector<std::uint8_t>{}), PeError);
    }
    SUBCASE("e_lfanew points at garbage") {
        std::vector<std::uint8_t> bytes(0x80, 0);
        bytes[0] = 'M';
        bytes[1] = 'Z';
        bytes[0x3C] = 0x40;
        try {
            parse_pe(bytes);
            FAIL("expected PeError");
        } catch (const PeError& e) {
            CHECK(e.code == PeError::Code::MissingPeSignature);
        }
    }
    SUBCASE("valid DOS header plus bare PE signature is truncated") {
        std::vector<std::uint8_t> bytes(0x44, 0);
        bytes[0] = 'M';
        bytes[1] = 'Z';
        bytes[0x3C] = 0x40;
        std::memcpy(bytes.data() + 0x40, "PE\0\0", 4);
        try {
            parse_pe(bytes);
            FAIL("expected PeError");
        } catch (const PeError& e) {
            CHECK(e.code == PeError::Code::Truncated);
        }
    }
    SUBCASE("section raw range past end of file is truncated") {
        auto bytes = build_synthetic_pe(three_section_spec());
        bytes.resize(bytes.size() - 300);
        try {
            parse_pe(bytes);
            FAIL("expected PeError");
        } catch (const PeError& e) {
            CHECK(e.code == PeError::Code::Truncated);
        }
    }
}

TEST_CASE("parse_pe reads PE32+ headers") {
    const PeFile pe = parse_pe(tiny_pe32_plus());
    CHECK(pe.is_pe32_plus);
    CHECK(pe.machine == 0x8664);
    CHECK(pe.num_sections == 1);
    CHECK(pe.image_base == 0x0000000140000000ULL);
    CHECK(pe.entry_point_rva == 0x1000);
    CHECK(pe.sections[0].name() == ".x");
}

TEST_CASE("resolve_entry_section") {
    SUBCASE("entry inside .text") {
        const PeFile pe = parse_pe(build_synthetic_pe(three_section_spec()));
        const EntryPointInfo ep = resolve_entry_section(pe);
        REQUIRE(ep.section_index.has_value());
        CHECK(*ep.section_index == 0);
        CHECK(ep.offset_in_section == 0x10);
        CHECK(ep.ep_bytes.size() == 1024 - 0x10);
        CHECK(ep.ep_bytes[0] == 0x90);
    }
    SUBCASE("entry beyond every section") {
        SyntheticPeSpec spec = three_section_spec();
        spec.entry = {"", 0, true};
        const EntryPointInfo ep = resolve_entry_section(parse_pe(build_synthetic_pe(spec)));
        CHECK_FALSE(ep.section_index.has_value());
        CHECK(ep.ep_bytes.empty());
    }
    SUBCASE("entry section with zero raw size is unusable") {
        SyntheticPeSpec spec;
        spec.sections.push_back({"UPX0", 0, 0xE0000080, SectionContent::zero_fill()});
        spec.sections.push_back({"UPX1", 512, 0x60000020, SectionContent::repeat(0xCC)});
        spec.entry = {"UPX0", 4, false};
        const EntryPointInfo ep = resolve_entry_section(parse_pe(build_synthetic_pe(spec)));
        CHECK_FALSE(ep.section_index.has_value());
    }
    SUBCASE("deterministic and pure") {
        const PeFile pe = parse_pe(build_synthetic_pe(three_section_spec()));
        const auto a = resolve_entry_section(pe);
        const auto b = resolve_entry_section(pe);
        CHECK(a.section_index == b.section_index);
        CHECK(a.ep_bytes == b.ep_bytes);
    }
}

TEST_CASE("shannon_entropy reference values") {
    SUBCASE("constant input is zero") {
        const std::vector<std::uint8_t> bytes(100, 0x00);
        CHECK(shannon_entropy(bytes) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("all 256 values once is exactly eight") {
        std::vector<std::uint8_t> bytes(256);
        for (int i = 0; i < 256; ++i) bytes[i] = std::uint8_t(i);
        CHECK(shannon_entropy(bytes) == 8.0);
    }
    SUBCASE("two equiprobable symbols give one bit") {
        std::vector<std::uint8_t> bytes;
        for (int i = 0; i < 50; ++i) {
            bytes.push_back('A');
            bytes.push_back('B');
        }
        CHECK(shannon_entropy(bytes) == 1.0);
    }
    SUBCASE("empty input is zero by convention") {
        CHECK(shannon_entropy({}) == 0.0);
    }
}

TEST_CASE("shannon_entropy properties") {
    Rng rng(7);
    std::vector<std::uint8_t> bytes(4096);
    for (auto& b : bytes) b = std::uint8_t(rng.uniform_index(64));

    SUBCASE("permutation invariance") {
        const double before = shannon_entropy(bytes);
        std::vector<std::uint8_t> shuffled = bytes;
        rng.shuffle(shuffled);
        CHECK(shannon_entropy(shuffled) == before);
    }
    SUBCASE("bounded by [0, 8], 8 only when equifrequent") {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<std::uint8_t> data(1 + rng.uniform_index(2000));
            for (auto& b : data) b = rng.next_byte();
            const double h = shannon_entropy(data);
            CHECK(h >= 0.0);
            CHECK(h <= 8.0);
        }
    }
    SUBCASE("parallel histogram matches the serial reference bit for bit") {
        std::vector<std::uint8_t> big(8 << 20);
        Rng content(99);
        for (auto& b : big) b = content.next_byte();
        const double serial = shannon_entropy_serial(big);
        const int saved = max_threads();
        set_max_threads(0);
        const double parallel = shannon_entropy(big);
        set_max_threads(saved);
        CHECK(parallel == serial);
    }
}
