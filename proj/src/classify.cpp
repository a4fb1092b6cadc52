#include "pocfuse/classify.hpp"

#include "pocfuse/io.hpp"
#include "pocfuse/text.hpp"

#include <algorithm>
#include <charconv>

namespace pocfuse {

extern const char* const kBuiltinSignatureTable;  // generated from data/signatures.tsv

namespace {

int parse_int(std::string_view s, std::size_t line_no) {
    int v = 0;
    const auto t = text::trim(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size()) {
        throw DataError("signature table line " + std::to_string(line_no) + ": expected integer, got '" +
                        std::string(t) + "'");
    }
    return v;
}

// Splits off the first `n` tab-separated fields; the remainder of the line is the last field.
std::vector<std::string_view> split_fields(std::string_view line, std::size_t n) {
    std::vector<std::string_view> out;
    while (out.size() + 1 < n) {
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) break;
        out.push_back(line.substr(0, tab));
        line.remove_prefix(tab + 1);
    }
    out.push_back(line);
    return out;
}

}  // namespace

SignatureTable SignatureTable::parse(std::string_view table_text) {
    SignatureTable table;
    std::vector<LanguageSignature> by_lang(kAllLanguages.size());
    for (std::size_t i = 0; i < kAllLanguages.size(); ++i) by_lang[i].language = kAllLanguages[i];

    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(table_text)) {
        ++line_no;
        const auto t = text::trim(line.text);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = split_fields(line.text, 3);
        const auto head = text::trim(fields[0]);
        const auto fail = [&](const std::string& why) {
            return DataError("signature table line " + std::to_string(line_no) + ": " + why);
        };
        if (head == "version") {
            if (fields.size() < 2) throw fail("version needs a value");
            table.version_ = parse_int(fields[1], line_no);
            continue;
        }
        if (head == "min_hits") {
            if (fields.size() < 3) throw fail("min_hits needs a language and a value");
            const auto lang = parse_language(fields[1]);
            if (!lang) throw fail("unknown language '" + std::string(fields[1]) + "'");
            const int v = parse_int(fields[2], line_no);
            if (v < 1) throw fail("min_hits must be >= 1");
            by_lang[static_cast<std::size_t>(*lang)].min_hits = v;
            continue;
        }
        if (fields.size() < 3) throw fail("expected <language> <weight> <pattern>");
        const auto lang = parse_language(head);
        if (!lang) throw fail("unknown language '" + std::string(head) + "'");
        SignaturePattern p;
        p.weight = parse_int(fields[1], line_no);
        if (p.weight < 1) throw fail("weight must be >= 1");
        p.source = std::string(fields[2]);
        if (p.source.empty()) throw fail("empty pattern");
        try {
            p.re = std::regex(p.source, std::regex::ECMAScript | std::regex::multiline | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw fail("bad pattern '" + p.source + "': " + e.what());
        }
        by_lang[static_cast<std::size_t>(*lang)].patterns.push_back(std::move(p));
    }
    if (table.version_ != 1) throw DataError("unsupported signature table version " + std::to_string(table.version_));
    for (auto& sig : by_lang) {
        if (!sig.patterns.empty()) table.signatures_.push_back(std::move(sig));
    }
    return table;
}

SignatureTable SignatureTable::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

const SignatureTable& SignatureTable::builtin() {
    static const SignatureTable table = parse(kBuiltinSignatureTable);
    return table;
}

std::optional<LanguageMatch> detect_language(std::string_view content, const SignatureTable& table) {
    std::optional<LanguageMatch> best;
    if (content.empty()) return best;
    for (const auto& sig : table.signatures()) {
        int hits = 0;
        for (const auto& p : sig.patterns) {
            if (std::regex_search(content.begin(), content.end(), p.re)) hits += p.weight;
        }
        if (hits < sig.min_hits) continue;
        // Signatures are in LanguageId order, so strict > keeps the earlier language on ties.
        if (!best || hits > best->hit_count) best = LanguageMatch{sig.language, hits};
    }
    return best;
}

PocReport categorize(PocReport report, const SignatureTable& table) {
    if (report.content_kind.tag != ContentKind::Tag::Unclassified) {
        throw ContractError("categorize: report '" + report.id + "' is already classified");
    }
    const auto match = detect_language(report.raw_content, table);
    report.content_kind = match ? ContentKind::code(match->language) : ContentKind::text();
    return report;
}

}  // namespace pocfuse
