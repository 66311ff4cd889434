#ifndef PACKTRIAGE_SIGNATURES_HPP
#define PACKTRIAGE_SIGNATURES_HPP

#include "packtriage/pe_file.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace packtriage {

/// One pattern byte: `value` carries the fixed bits, `mask` selects which
/// bits must match. "??" has mask 0, "7?" has mask 0xF0, exact bytes 0xFF.
struct PatternToken {
    std::uint8_t value = 0;
    std::uint8_t mask = 0;

    bool matches(std::uint8_t b) const { return ((b ^ value) & mask) == 0; }
};

struct SignatureEntry {
    std::string name;
    std::vector<PatternToken> pattern;
    bool ep_only = false;
};

/// Entries keep file order; the matcher returns the last one that hits.
struct SignatureDb {
    std::vector<SignatureEntry> entries;
};

struct MatchResult {
    std::optional<std::string> packer_name;
    std::optional<std::size_t> matched_entry_index;
    std::optional<std::uint64_t> matched_at; // file offset of the match start

    bool matched() const { return packer_name.has_value(); }
};

/// Parses the userdb text format:
///
///     [Packer Name]
///     signature = 60 BE ?? ?? 7? 00
///     ep_only = true
///
/// Records are separated by blank lines; LF and CRLF both accepted; names
/// may contain anything except ']'. Throws DbError with the line number on
/// malformed records. Duplicate names are allowed.
SignatureDb parse_signature_db(std::string_view text);

/// Renders a db back into the text format parse_signature_db reads.
std::string render_signature_db(const SignatureDb& db);

/// True iff the whole pattern fits at `offset` and every token matches.
bool match_pattern(std::span<const PatternToken> pattern,
                   std::span<const std::uint8_t> data, std::size_t offset);

/// Scans the entry-point section: ep_only entries anchored at the entry
/// point, the rest at every offset of the section's raw bytes. Among all
/// hits the entry with the largest db index wins. A file without a usable
/// entry section yields an empty result.
MatchResult identify_packer(const PeFile& pe, const SignatureDb& db);

} // namespace packtriage

#endif
