#include "packtriage/signatures.hpp"

#include "packtriage/errors.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace packtriage {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

PatternToken parse_token(std::string_view tok, int line_no) {
    if (tok.size() != 2)
        throw DbError(line_no, "bad signature token '" + std::string(tok) + "'");
    PatternToken t;
    for (int half = 0; half < 2; ++half) {
        const char c = tok[half];
        const int shift = half == 0 ? 4 : 0;
        if (c == '?') continue;
        const int v = hex_nibble(c);
        if (v < 0)
            throw DbError(line_no, "bad signature token '" + std::string(tok) + "'");
        t.value |= static_cast<std::uint8_t>(v << shift);
        t.mask |= static_cast<std::uint8_t>(0xF << shift);
    }
    return t;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            if (pos < text.size()) lines.push_back(text.substr(pos));
            break;
        }
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

} // namespace

SignatureDb parse_signature_db(std::string_view text) {
    SignatureDb db;
    const auto lines = split_lines(text);

    std::size_t i = 0;
    while (i < lines.size()) {
        if (trim(lines[i]).empty()) {
            ++i;
            continue;
        }
        const int header_line = static_cast<int>(i) + 1;
        std::string_view header = trim(lines[i]);
        if (header.front() != '[' || header.back() != ']')
            throw DbError(header_line, "expected [Name] header");
        std::string name(header.substr(1, header.size() - 2));
        if (name.find(']') != std::string::npos)
            throw DbError(header_line, "name contains ']'");

        if (i + 2 >= lines.size())
            throw DbError(header_line, "record truncated");

        std::string_view sig_line = trim(lines[i + 1]);
        if (!sig_line.starts_with("signature"))
            throw DbError(static_cast<int>(i) + 2, "expected 'signature = ...'");
        std::size_t eq = sig_line.find('=');
        if (eq == std::string_view::npos)
            throw DbError(static_cast<int>(i) + 2, "expected '=' in signature line");

        SignatureEntry entry;
        entry.name = std::move(name);
        std::istringstream toks{std::string(sig_line.substr(eq + 1))};
        std::string tok;
        while (toks >> tok)
            entry.pattern.push_back(parse_token(tok, static_cast<int>(i) + 2));
        if (entry.pattern.empty())
            throw DbError(static_cast<int>(i) + 2, "empty signature");

        std::string_view ep_line = trim(lines[i + 2]);
        if (!ep_line.starts_with("ep_only"))
            throw DbError(static_cast<int>(i) + 3, "expected 'ep_only = true|false'");
        eq = ep_line.find('=');
        std::string value = eq == std::string_view::npos
                                ? std::string()
                                : lower(trim(ep_line.substr(eq + 1)));
        if (value == "true")
            entry.ep_only = true;
        else if (value == "false")
            entry.ep_only = false;
        else
            throw DbError(static_cast<int>(i) + 3, "ep_only must be true or false");

        db.entries.push_back(std::move(entry));
        i += 3;
    }
    return db;
}

std::string render_signature_db(const SignatureDb& db) {
    std::string out;
    for (const auto& e : db.entries) {
        out += '[';
        out += e.name;
        out += "]\nsignature =";
        for (const auto& t : e.pattern) {
            out += ' ';
            for (int half = 0; half < 2; ++half) {
                const int shift = half == 0 ? 4 : 0;
                if ((t.mask >> shift & 0xF) == 0) {
                    out += '?';
                } else {
                    out += "0123456789ABCDEF"[t.value >> shift & 0xF];
                }
            }
        }
        out += "\nep_only = ";
        out += e.ep_only ? "true" : "false";
        out += "\n\n";
    }
    return out;
}

bool match_pattern(std::span<const PatternToken> pattern,
                   std::span<const std::uint8_t> data, std::size_t offset) {
    if (offset > data.size() || pattern.size() > data.size() - offset) return false;
    for (std::size_t i = 0; i < pattern.size(); ++i)
        if (!pattern[i].matches(data[offset + i])) return false;
    return true;
}

MatchResult identify_packer(const PeFile& pe, const SignatureDb& db) {
    MatchResult result;
    const EntryPointInfo ep = resolve_entry_section(pe);
    if (!ep.section_index) return result;

    const SectionHeader& section = pe.sections[*ep.section_index];
    const auto section_bytes = pe.section_raw_bytes(section);
    const std::uint64_t ep_file_offset =
        std::uint64_t{section.raw_offset} + ep.offset_in_section;

    for (std::size_t i = 0; i < db.entries.size(); ++i) {
        const auto& entry = db.entries[i];
        if (entry.ep_only) {
            if (match_pattern(entry.pattern, ep.ep_bytes, 0)) {
                result.packer_name = entry.name;
                result.matched_entry_index = i;
                result.matched_at = ep_file_offset;
            }
        } else {
            for (std::size_t off = 0; off + entry.pattern.size() <= section_bytes.size();
                 ++off) {
                if (match_pattern(entry.pattern, section_bytes, off)) {
                    result.packer_name = entry.name;
                    result.matched_entry_index = i;
                    result.matched_at = std::uint64_t{section.raw_offset} + off;
                    break;
                }
            }
        }
    }
    return result;
}

} // namespace packtriage
