#ifndef PACKTRIAGE_TESTS_CORPUS_HPP
#define PACKTRIAGE_TESTS_CORPUS_HPP

#include "packtriage/labeling.hpp"
#include "packtriage/rng.hpp"
#include "packtriage/synth.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace testsupport {

constexpr std::uint32_t kRead = 0x40000000;
constexpr std::uint32_t kWrite = 0x80000000;
constexpr std::uint32_t kExecute = 0x20000000;
constexpr std::uint32_t kCode = 0x00000020;

/// Random bytes drawn from a contiguous alphabet; entropy approaches
/// log2(alphabet_size) for long buffers.
inline std::vector<std::uint8_t> alphabet_bytes(std::size_t n, std::uint8_t base,
                                                std::size_t alphabet_size,
                                                std::uint64_t seed) {
    packtriage::Rng rng(seed);
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes)
        b = static_cast<std::uint8_t>(base + rng.uniform_index(alphabet_size));
    return bytes;
}

inline std::vector<std::uint8_t> full_random_bytes(std::size_t n, std::uint64_t seed) {
    packtriage::Rng rng(seed);
    std::vector<std::uint8_t> bytes(n);
    for (auto& b : bytes) b = rng.next_byte();
    return bytes;
}

/// Entry-point byte strings that each hit exactly one record of the shipped
/// signature databases.
inline const std::vector<std::vector<std::uint8_t>>& planted_signatures() {
    static const std::vector<std::vector<std::uint8_t>> sigs = {
        {0x60, 0xE8, 0x00, 0x00, 0x00, 0x00, 0x58, 0x83, 0xE8, 0x3D}, // UPX 0.50 - 0.70
        {0x75, 0x00, 0xE9},                                           // ASPack 1.05b by
        {0x90, 0x90, 0x75, 0x00, 0xE9},                               // ASPack 1.061b
        {0x60, 0xBE, 0x10, 0x20, 0x30, 0x00, 0x8D, 0xBE, 0x40, 0x50, 0x60,
         0xFF}, // UPX -> www.upx.sourceforge.net
        {0x55, 0x8B, 0xEC, 0x53, 0x56, 0x57, 0x60, 0xE8, 0x00, 0x00, 0x00, 0x5D,
         0x81, 0xED, 0x6C, 0x28, 0x40, 0x00, 0xB9, 0x5D, 0x34, 0x40,
         0x00}, // yoda's Crypter 1.3 -> Ashkbiz Danehkar
        {0x90, 0x90, 0x90, 0x75, 0x01, 0x90, 0xE9}, // ASPack 1.08
    };
    return sigs;
}

struct CorpusFile {
    std::string name;
    packtriage::SyntheticPeSpec spec;
    packtriage::PackLabel expected = packtriage::PackLabel::NotPacked;
};

/// Ordinary executable: benign prologue, low-entropy code, standard section
/// names, healthy import table, read-only entry section.
inline CorpusFile make_not_packed(std::size_t i, std::uint64_t seed) {
    using namespace packtriage;
    CorpusFile file;
    file.name = "plain_" + std::to_string(i) + ".exe";
    file.expected = PackLabel::NotPacked;

    std::vector<std::uint8_t> code = {0x55, 0x8B, 0xEC, 0x83, 0xEC, 0x40,
                                      0x53, 0x56, 0x57,
                                      std::uint8_t(i & 0xFF), std::uint8_t(i >> 8)};
    const std::size_t text_size = 3072 + 64 * (i % 8);
    const auto tail = alphabet_bytes(text_size - code.size(), 0x40,
                                     i % 2 == 0 ? 16 : 32, mix_seed(seed, 1));
    code.insert(code.end(), tail.begin(), tail.end());

    file.spec.sections.push_back({".text", std::uint32_t(text_size), kRead | kExecute | kCode,
                                  SectionContent::literal(std::move(code))});
    file.spec.sections.push_back({".data", std::uint32_t(512 + 32 * (i % 4)),
                                  kRead | kWrite,
                                  SectionContent::literal(alphabet_bytes(
                                      512 + 32 * (i % 4), 0x20, 16, mix_seed(seed, 2)))});
    file.spec.sections.push_back(
        {".rdata", 512, kRead,
         SectionContent::literal(alphabet_bytes(512, 0x61, 16, mix_seed(seed, 3)))});
    file.spec.sections.push_back({".rsrc", 256, kRead, SectionContent::repeat(0x00)});
    file.spec.entry = {".text", 0, false};
    file.spec.import_dlls = 2 + std::uint32_t(i % 3);
    file.spec.import_symbols = 20 + std::uint32_t(i % 30);
    if (i % 10 == 0) file.spec.overlay_size = 256;
    return file;
}

/// Custom packer look-alike: either the entry point is hidden outside every
/// section, or the entry section is writable with near-maximal entropy.
inline CorpusFile make_custom_packed(std::size_t i, std::uint64_t seed) {
    using namespace packtriage;
    CorpusFile file;
    file.name = "custom_" + std::to_string(i) + ".exe";
    file.expected = PackLabel::CustomPacked;

    if (i % 2 == 0) {
        // hidden entry point
        file.spec.sections.push_back(
            {".text", std::uint32_t(2048 + 64 * (i % 4)), kRead | kExecute | kCode,
             SectionContent::literal(alphabet_bytes(2048 + 64 * (i % 4), 0x40, 16,
                                                    mix_seed(seed, 1)))});
        file.spec.sections.push_back({".data", 512, kRead | kWrite,
                                      SectionContent::repeat(std::uint8_t(i))});
        file.spec.entry = {"", 0, true};
        file.spec.import_dlls = 1;
        file.spec.import_symbols = 4;
        return file;
    }

    // writable, high-entropy entry section; the two fixed lead bytes keep it
    // clear of every anchored signature
    std::vector<std::uint8_t> blob = {0xC8, 0xC9};
    const auto body = full_random_bytes(4094 + 64 * (i % 3), mix_seed(seed, 1));
    blob.insert(blob.end(), body.begin(), body.end());
    file.spec.sections.push_back({"pak0", std::uint32_t(blob.size()),
                                  kRead | kWrite | kExecute | kCode,
                                  SectionContent::literal(std::move(blob))});
    file.spec.sections.push_back({".rsrc", 256, kRead, SectionContent::repeat(0x00)});
    file.spec.entry = {"pak0", 0, false};
    file.spec.import_dlls = 1;
    file.spec.import_symbols = 3;
    return file;
}

/// Stub layout of a well-known packer: zero-raw first section, writable
/// executable entry section starting with a real signature byte string.
inline CorpusFile make_well_known_packed(std::size_t i, std::uint64_t seed) {
    using namespace packtriage;
    CorpusFile file;
    file.name = "packed_" + std::to_string(i) + ".exe";
    file.expected = PackLabel::WellKnownPacked;

    const auto& sigs = planted_signatures();
    std::vector<std::uint8_t> stub = sigs[i % sigs.size()];
    const std::size_t stub_size = 4096 + 64 * (i % 4);
    const auto tail =
        alphabet_bytes(stub_size - stub.size(), 0x20, 64, mix_seed(seed, 1));
    stub.insert(stub.end(), tail.begin(), tail.end());

    file.spec.sections.push_back({"UPX0", 0, kRead | kWrite, SectionContent::zero_fill()});
    file.spec.sections.push_back({"UPX1", std::uint32_t(stub_size),
                                  kRead | kWrite | kExecute | kCode,
                                  SectionContent::literal(std::move(stub))});
    file.spec.sections.push_back({".rsrc", 256, kRead,
                                  SectionContent::repeat(std::uint8_t(0x10 + i % 16))});
    file.spec.entry = {"UPX1", 0, false};
    file.spec.import_dlls = 1;
    file.spec.import_symbols = 4 + std::uint32_t(i % 3);
    return file;
}

inline std::vector<CorpusFile> make_corpus(std::size_t per_class, std::uint64_t seed) {
    std::vector<CorpusFile> corpus;
    for (std::size_t i = 0; i < per_class; ++i) {
        corpus.push_back(make_not_packed(i, packtriage::mix_seed(seed, 1000 + i)));
        corpus.push_back(make_custom_packed(i, packtriage::mix_seed(seed, 2000 + i)));
        corpus.push_back(make_well_known_packed(i, packtriage::mix_seed(seed, 3000 + i)));
    }
    return corpus;
}

/// Writes the corpus into `dir` (wiped first) and returns the file paths in
/// corpus order.
inline std::vector<std::string> write_corpus(const std::string& dir,
                                             const std::vector<CorpusFile>& corpus) {
    namespace fs = std::filesystem;
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<std::string> paths;
    for (const auto& file : corpus) {
        const auto bytes = packtriage::build_synthetic_pe(file.spec);
        const std::string path = (fs::path(dir) / file.name).string();
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        paths.push_back(path);
    }
    return paths;
}

} // namespace testsupport

#endif
