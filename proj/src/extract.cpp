#include "pocfuse/extract.hpp"

#include "pocfuse/io.hpp"
#include "pocfuse/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <regex>
#include <set>
#include <unordered_map>

namespace pocfuse {

using text::Line;

// ---------------------------------------------------------------------------
// Rule set

RuleSet RuleSet::defaults() {
    RuleSet r;
    // "complie with" is kept verbatim alongside its corrected spelling.
    r.trigger_keywords = {"steps", "step", "reproduce", "complie with", "compile with"};
    r.oracle_keywords = {"expected output", "PoC output", "expected result"};
    r.step_list_patterns = {
        R"(\d{1,2}[.)])",
        R"([a-zA-Z][.)])",
        R"(\(\d{1,2}\))",
        R"(\([a-zA-Z]\))",
        R"([Ss]tep[ \t]*\d{1,2}[ \t]*[:.)-])",
    };
    r.url_pattern =
        R"((?:https?|ftp)://(?:[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?\.)*[A-Za-z0-9](?:[A-Za-z0-9-]*[A-Za-z0-9])?(?::\d{1,5})?(?:[/?#][^\s<>"'`]*)?)";
    return r;
}

void RuleSet::validate() const {
    const auto has = [](const std::vector<std::string>& v, std::string_view k) {
        return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return text::fold_equal(s, k); });
    };
    for (auto k : {"steps", "reproduce", "complie with"}) {
        if (!has(trigger_keywords, k)) throw ContractError(std::string("trigger keywords must include '") + k + "'");
    }
    for (auto k : {"expected output", "PoC output"}) {
        if (!has(oracle_keywords, k)) throw ContractError(std::string("oracle keywords must include '") + k + "'");
    }
    if (step_list_patterns.empty()) throw ContractError("step list patterns must not be empty");
    if (url_pattern.empty()) throw ContractError("url pattern must not be empty");
}

namespace {

std::string regex_escape(std::string_view s) {
    static constexpr std::string_view special = R"(\^$.|?*+()[]{}/)";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string_view::npos) out += '\\';
        out += c;
    }
    return out;
}

std::regex keyword_regex(const std::vector<std::string>& keywords) {
    std::string alt;
    for (const auto& k : keywords) {
        if (!alt.empty()) alt += '|';
        std::string escaped;
        for (char c : regex_escape(text::trim(k))) {
            if (c == ' ') {
                escaped += "[ \\t]+";
            } else {
                escaped += c;
            }
        }
        alt += escaped;
    }
    return std::regex("\\b(?:" + alt + ")\\b", std::regex::ECMAScript | std::regex::icase);
}

std::regex item_regex(const std::vector<std::string>& markers) {
    std::string alt;
    for (const auto& m : markers) {
        if (!alt.empty()) alt += '|';
        alt += "(?:" + m + ")";
    }
    // An item may sit inside a line comment, e.g. "# 1. start the server".
    return std::regex(R"(^[ \t]*(?:(?:#|//|\*|--|;)[ \t]*)?(?:)" + alt + R"()[ \t]+\S)", std::regex::ECMAScript);
}

struct Region {
    std::size_t first_line = 0;
    std::size_t last_line = 0;  // inclusive
};

bool is_blank(const Line& l) { return text::trim(l.text).empty(); }
bool is_indented(const Line& l) { return !l.text.empty() && (l.text.front() == ' ' || l.text.front() == '\t'); }

std::string region_text(std::string_view content, const std::vector<Line>& lines, const Region& r) {
    const auto b = lines[r.first_line].begin;
    const auto e = lines[r.last_line].end;
    return std::string(text::trim(content.substr(b, e - b)));
}

// Longest region wins among overlapping candidates; survivors are returned in document order.
std::vector<std::string> resolve(std::string_view content, const std::vector<Line>& lines,
                                 std::vector<Region> candidates) {
    const auto length = [&](const Region& r) { return lines[r.last_line].end - lines[r.first_line].begin; };
    std::stable_sort(candidates.begin(), candidates.end(), [&](const Region& a, const Region& b) {
        if (length(a) != length(b)) return length(a) > length(b);
        return a.first_line < b.first_line;
    });
    std::vector<Region> chosen;
    for (const auto& c : candidates) {
        const bool overlaps = std::any_of(chosen.begin(), chosen.end(), [&](const Region& k) {
            return !(c.last_line < k.first_line || k.last_line < c.first_line);
        });
        if (!overlaps) chosen.push_back(c);
    }
    std::sort(chosen.begin(), chosen.end(), [](const Region& a, const Region& b) { return a.first_line < b.first_line; });
    std::vector<std::string> out;
    for (const auto& r : chosen) {
        auto t = region_text(content, lines, r);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

struct StepBlock {
    Region region;
    std::size_t items = 0;
};

// Step block starting at line i (which must be an item). Blank lines may separate items;
// indented non-item lines directly after an item are continuations.
StepBlock scan_step_block(const std::vector<Line>& lines, std::size_t i, const std::vector<bool>& is_item) {
    StepBlock b{{i, i}, 0};
    std::size_t k = i;
    while (k < lines.size()) {
        if (!is_item[k]) break;
        ++b.items;
        b.region.last_line = k;
        ++k;
        while (k < lines.size() && !is_item[k] && !is_blank(lines[k]) && is_indented(lines[k])) {
            b.region.last_line = k;
            ++k;
        }
        std::size_t next = k;
        while (next < lines.size() && is_blank(lines[next])) ++next;
        if (next < lines.size() && is_item[next]) {
            k = next;
        } else {
            break;
        }
    }
    return b;
}

std::size_t next_nonblank(const std::vector<Line>& lines, std::size_t k) {
    while (k < lines.size() && is_blank(lines[k])) ++k;
    return k;
}

// Text after the matched keyword, past an optional colon.
std::string_view after_keyword(std::string_view line, const std::regex& kw, bool* had_colon) {
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(line.begin(), line.end(), m, kw)) return {};
    auto rest = line.substr(static_cast<std::size_t>(m.position(0) + m.length(0)));
    const auto colon = rest.find(':');
    *had_colon = colon != std::string_view::npos;
    if (*had_colon) rest = rest.substr(colon + 1);
    return text::trim(rest);
}

std::string_view comment_marker(std::string_view line) {
    const auto t = line.substr(std::min(line.size(), line.find_first_not_of(" \t")));
    for (std::string_view m : {"//", "--", "#", ";", "*"}) {
        if (t.substr(0, m.size()) == m) return m;
    }
    return {};
}

}  // namespace

std::vector<std::string> extract_trigger_step(std::string_view content, const RuleSet& rules) {
    const auto lines = text::split_lines(content);
    if (lines.empty()) return {};
    const auto kw = keyword_regex(rules.trigger_keywords);
    const auto item = item_regex(rules.step_list_patterns);

    std::vector<bool> is_item(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        is_item[i] = std::regex_search(lines[i].text.begin(), lines[i].text.end(), item);
    }

    std::vector<Region> candidates;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_item[i] && (i == 0 || !is_item[i - 1])) {
            const auto block = scan_step_block(lines, i, is_item);
            if (block.items >= 2) candidates.push_back(block.region);
        }
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& l = lines[i];
        if (!std::regex_search(l.text.begin(), l.text.end(), kw)) continue;
        const auto next = next_nonblank(lines, i + 1);
        if (next < lines.size() && is_item[next] && !is_item[i]) {
            candidates.push_back({i, scan_step_block(lines, next, is_item).region.last_line});
            continue;
        }
        bool colon = false;
        const auto rest = after_keyword(l.text, kw, &colon);
        if (colon && !rest.empty()) {
            candidates.push_back({i, i});
        } else if (colon && i + 1 < lines.size() && !is_blank(lines[i + 1])) {
            std::size_t last = i + 1;
            while (last + 1 < lines.size() && !is_blank(lines[last + 1])) ++last;
            candidates.push_back({i, last});
        }
    }
    return resolve(content, lines, std::move(candidates));
}

std::vector<std::string> extract_verification_oracle(std::string_view content, const RuleSet& rules) {
    const auto lines = text::split_lines(content);
    if (lines.empty()) return {};
    const auto kw = keyword_regex(rules.oracle_keywords);

    std::vector<Region> candidates;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& l = lines[i];
        if (!std::regex_search(l.text.begin(), l.text.end(), kw)) continue;
        Region r{i, i};
        const auto marker = comment_marker(l.text);
        const auto continues = [&](const Line& next) {
            if (is_blank(next)) return false;
            if (marker.empty()) return is_indented(next);
            const auto t = next.text.substr(std::min(next.text.size(), next.text.find_first_not_of(" \t")));
            if (t.substr(0, marker.size()) != marker) return is_indented(next);
            const auto body = t.substr(marker.size());
            return body.size() >= 2 && (body[0] == ' ' || body[0] == '\t') && (body[1] == ' ' || body[1] == '\t');
        };
        std::size_t k = i + 1;
        if (k < lines.size() && text::trim(lines[k].text).substr(0, 3) == "```") {
            std::size_t close = k + 1;
            while (close < lines.size() && text::trim(lines[close].text).substr(0, 3) != "```") ++close;
            r.last_line = std::min(close, lines.size() - 1);
        } else {
            while (k < lines.size() && continues(lines[k])) {
                r.last_line = k;
                ++k;
            }
        }
        candidates.push_back(r);
    }
    return resolve(content, lines, std::move(candidates));
}

namespace {

// Single-label, loopback, private, and unspecified hosts name the test target, not an external resource.
bool is_local_host(std::string_view url) {
    const auto b = url.find("://") + 3;
    const auto e = url.find_first_of(":/?#", b);
    const auto host = text::to_lower(url.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
    if (host.find('.') == std::string::npos || host.ends_with(".localhost")) return true;
    unsigned o[4];
    char tail;
    if (std::sscanf(host.c_str(), "%u.%u.%u.%u%c", &o[0], &o[1], &o[2], &o[3], &tail) != 4) return false;
    return o[0] == 127 || o[0] == 10 || o[0] == 0 || (o[0] == 192 && o[1] == 168) ||
           (o[0] == 172 && o[1] >= 16 && o[1] <= 31) || (o[0] == 169 && o[1] == 254);
}

}  // namespace

std::vector<std::string> extract_references(std::string_view content, const RuleSet& rules) {
    const std::regex re(rules.url_pattern, std::regex::ECMAScript | std::regex::icase);
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto it = std::regex_iterator<std::string_view::const_iterator>(content.begin(), content.end(), re);
         it != std::regex_iterator<std::string_view::const_iterator>(); ++it) {
        std::string url = it->str();
        // Strip trailing punctuation; closing brackets only when unbalanced inside the URL.
        while (!url.empty()) {
            const char c = url.back();
            if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '\'' || c == '"' ||
                c == '>' || c == '}') {
                url.pop_back();
                continue;
            }
            if (c == ')' || c == ']') {
                const char open = c == ')' ? '(' : '[';
                if (std::count(url.begin(), url.end(), open) < std::count(url.begin(), url.end(), c)) {
                    url.pop_back();
                    continue;
                }
            }
            break;
        }
        if (url.find("://") + 3 >= url.size() || is_local_host(url)) continue;
        if (seen.insert(url).second) out.push_back(std::move(url));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CVE ids

CveFieldLocator default_cve_locator() {
    return [](const PocReport& r) { return r.cve_field; };
}

std::vector<std::string> extract_cve_ids(const PocReport& report, const CveFieldLocator& locator) {
    static const std::regex body_re(R"(\bCVE-\d{4}-\d{4,}\b)", std::regex::icase);
    static const std::regex bare_re(R"(\b\d{4}-\d{4,}\b)");
    std::vector<std::string> out;
    const auto push = [&](std::string_view candidate) {
        if (auto c = canonical_cve(candidate); c && std::find(out.begin(), out.end(), *c) == out.end()) {
            out.push_back(*c);
        }
    };
    const auto scan = [&](std::string_view s, const std::regex& re, bool prefix) {
        for (auto it = std::regex_iterator<std::string_view::const_iterator>(s.begin(), s.end(), re);
             it != std::regex_iterator<std::string_view::const_iterator>(); ++it) {
            push(prefix ? "CVE-" + it->str() : it->str());
        }
    };
    if (const auto field = locator(report)) {
        for (const auto& v : *field) {
            if (text::fold_contains(v, "cve-")) {
                scan(v, body_re, false);
            } else {
                scan(v, bare_re, true);
            }
        }
        return out;
    }
    scan(report.raw_content, body_re, false);
    return out;
}

// ---------------------------------------------------------------------------
// Structured extraction

Aspect aspect_of(StructuredSlot s) {
    switch (s) {
        case StructuredSlot::TestPlatform: return Aspect::TestPlatform;
        case StructuredSlot::SoftwareVersion: return Aspect::SoftwareVersion;
        case StructuredSlot::Title: return Aspect::Title;
        case StructuredSlot::Author: return Aspect::Author;
        case StructuredSlot::PublishTime: return Aspect::PublishTime;
    }
    return Aspect::Title;
}

std::string_view to_string(StructuredSlot s) { return to_string(aspect_of(s)); }

std::optional<StructuredSlot> parse_structured_slot(std::string_view name) {
    for (auto s : kStructuredSlots) {
        if (to_string(s) == text::fold(name)) return s;
    }
    return std::nullopt;
}

const std::vector<Span>& StructuredExtraction::slot(StructuredSlot s) const {
    static const std::vector<Span> empty;
    const auto it = slots.find(s);
    return it == slots.end() ? empty : it->second;
}

void validate_spans(const StructuredExtraction& ex, std::string_view content) {
    const auto check = [&](const Span& sp, std::string_view where) {
        if (sp.start > sp.end || sp.end > content.size()) {
            throw ContractError(std::string(where) + " span [" + std::to_string(sp.start) + "," +
                                std::to_string(sp.end) + ") lies outside the document (size " +
                                std::to_string(content.size()) + ")");
        }
        if (content.substr(sp.start, sp.end - sp.start) != sp.text) {
            throw ContractError(std::string(where) + " span text does not match the document");
        }
        if (text::trim(sp.text).empty()) throw ContractError(std::string(where) + " span is empty");
    };
    for (const auto& [slot, spans] : ex.slots) {
        for (const auto& sp : spans) check(sp, to_string(slot));
    }
    for (const auto& sp : ex.software) check(sp, "software");
}

namespace {

enum class HeaderField { Title, Author, PublishTime, Platform, Version, Software };

const std::unordered_map<std::string, HeaderField>& header_labels() {
    static const std::unordered_map<std::string, HeaderField> labels = {
        {"title", HeaderField::Title},
        {"exploit title", HeaderField::Title},
        {"exploit name", HeaderField::Title},
        {"advisory title", HeaderField::Title},
        {"vulnerability title", HeaderField::Title},
        {"author", HeaderField::Author},
        {"authors", HeaderField::Author},
        {"exploit author", HeaderField::Author},
        {"discovered by", HeaderField::Author},
        {"found by", HeaderField::Author},
        {"coded by", HeaderField::Author},
        {"written by", HeaderField::Author},
        {"credits", HeaderField::Author},
        {"credit", HeaderField::Author},
        {"researcher", HeaderField::Author},
        {"date", HeaderField::PublishTime},
        {"published", HeaderField::PublishTime},
        {"publish date", HeaderField::PublishTime},
        {"published date", HeaderField::PublishTime},
        {"date published", HeaderField::PublishTime},
        {"release date", HeaderField::PublishTime},
        {"disclosure date", HeaderField::PublishTime},
        {"platform", HeaderField::Platform},
        {"tested on", HeaderField::Platform},
        {"test platform", HeaderField::Platform},
        {"tested platform", HeaderField::Platform},
        {"os", HeaderField::Platform},
        {"operating system", HeaderField::Platform},
        {"target os", HeaderField::Platform},
        {"version", HeaderField::Version},
        {"versions", HeaderField::Version},
        {"affected version", HeaderField::Version},
        {"affected versions", HeaderField::Version},
        {"vulnerable version", HeaderField::Version},
        {"vulnerable versions", HeaderField::Version},
        {"software version", HeaderField::Version},
        {"product version", HeaderField::Version},
        {"software", HeaderField::Software},
        {"product", HeaderField::Software},
        {"application", HeaderField::Software},
        {"vulnerable software", HeaderField::Software},
        {"affected software", HeaderField::Software},
        {"affected product", HeaderField::Software},
        {"software name", HeaderField::Software},
    };
    return labels;
}

// Offset just past any leading whitespace and comment/bullet markers.
std::size_t skip_markers(std::string_view line) {
    std::size_t p = 0;
    bool progressed = true;
    while (progressed && p < line.size()) {
        progressed = false;
        while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) {
            ++p;
            progressed = true;
        }
        for (std::string_view m : {"<!--", "[+]", "[*]", "[-]", "//", "/*", "--", "#", "*", ";", "%", "=", ">"}) {
            if (line.substr(p, m.size()) == m) {
                p += m.size();
                progressed = true;
                break;
            }
        }
    }
    return p;
}

// Trims a [b, e) range of `s` and drops closing comment markers.
std::pair<std::size_t, std::size_t> trim_range(std::string_view s, std::size_t b, std::size_t e) {
    const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    bool changed = true;
    while (changed) {
        changed = false;
        while (b < e && is_ws(s[b])) ++b;
        while (e > b && is_ws(s[e - 1])) --e;
        for (std::string_view m : {"*/", "-->", "#"}) {
            if (e - b >= m.size() && s.substr(e - m.size(), m.size()) == m) {
                e -= m.size();
                changed = true;
                break;
            }
        }
    }
    return {b, e};
}

bool has_letter_or_digit(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    });
}

bool is_placeholder(std::string_view v) {
    const auto f = text::fold(v);
    return f == "n/a" || f == "na" || f == "none" || f == "-" || f == "unknown" || f == "?";
}

Span make_span(std::string_view content, std::size_t b, std::size_t e) {
    return {std::string(content.substr(b, e - b)), b, e};
}

// Splits a value range on ',' and ';' into trimmed spans.
void push_split(std::vector<Span>& out, std::string_view content, std::size_t b, std::size_t e) {
    std::size_t start = b;
    for (std::size_t i = b; i <= e; ++i) {
        if (i == e || content[i] == ',' || content[i] == ';') {
            const auto [tb, te] = trim_range(content, start, i);
            if (te > tb && !is_placeholder(content.substr(tb, te - tb))) out.push_back(make_span(content, tb, te));
            start = i + 1;
        }
    }
}

bool is_shebang_or_prolog(std::string_view t) {
    return t.substr(0, 2) == "#!" || t.substr(0, 5) == "<?php" || t.find("-*- coding") != std::string_view::npos ||
           t.find("coding:") != std::string_view::npos;
}

bool is_comment_line(std::string_view t, LanguageId lang) {
    const auto starts = [&](std::string_view m) { return t.substr(0, m.size()) == m; };
    switch (lang) {
        case LanguageId::Python:
        case LanguageId::Ruby:
        case LanguageId::Perl:
        case LanguageId::Shell: return starts("#") || starts("\"\"\"");
        case LanguageId::Html: return starts("<!--");
        case LanguageId::Php: return starts("//") || starts("/*") || starts("*") || starts("#");
        case LanguageId::C_Cpp:
        case LanguageId::Java:
        case LanguageId::JavaScript: return starts("//") || starts("/*") || starts("*");
    }
    return false;
}

// Software name and optional version from an untagged title such as "SLMail 5.5 - POP3 Overflow".
void title_software(std::string_view content, const Span& title, std::vector<Span>& software,
                    std::vector<Span>& versions) {
    static const std::regex version_re(R"(^v?\d+(?:\.\d+)+[a-z]?$|^v\d+$)", std::regex::icase);
    std::size_t p = title.start;
    const std::size_t end = title.end;
    std::size_t name_end = title.start;
    int words = 0;
    while (p < end) {
        while (p < end && content[p] == ' ') ++p;
        if (p >= end) break;
        std::size_t q = p;
        while (q < end && content[q] != ' ') ++q;
        const auto tok = content.substr(p, q - p);
        const bool digit = std::any_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; });
        const bool separator = !has_letter_or_digit(tok) || tok.front() == '(' || tok.front() == '<';
        if (digit || separator) {
            if (words == 0 || words > 4) return;
            software.push_back(make_span(content, title.start, name_end));
            if (digit && std::regex_match(tok.begin(), tok.end(), version_re)) {
                versions.push_back(make_span(content, p, q));
            }
            return;
        }
        ++words;
        name_end = q;
        p = q;
    }
}

// Request line ("GET /x HTTP/1.1") or status line ("HTTP/1.1 200 OK"); headers follow until a blank line.
bool starts_http_message(std::string_view t) {
    if (t.starts_with("HTTP/")) return true;
    const auto sp = t.find(' ');
    if (sp == std::string_view::npos) return false;
    static constexpr std::string_view methods[] = {"GET", "POST", "PUT", "DELETE", "HEAD", "OPTIONS", "PATCH"};
    const auto method = t.substr(0, sp);
    return std::find(std::begin(methods), std::end(methods), method) != std::end(methods) &&
           t.find(" HTTP/", sp) != std::string_view::npos;
}

}  // namespace

StructuredExtraction PatternStructuredExtractor::extract(const PocReport& report) const {
    const std::string_view content = report.raw_content;
    StructuredExtraction ex;
    const auto lines = text::split_lines(content);
    const auto& labels = header_labels();

    bool in_http = false;
    for (const auto& l : lines) {
        const auto p = skip_markers(l.text);
        const auto body = text::trim(l.text.substr(p));
        if (body.empty()) {
            in_http = false;
            continue;
        }
        if (starts_http_message(body)) in_http = true;
        if (in_http) continue;
        const auto colon = l.text.find(':', p);
        if (colon == std::string_view::npos || colon == p || colon - p > 40) continue;
        const auto label = text::fold(l.text.substr(p, colon - p));
        const auto it = labels.find(label);
        if (it == labels.end()) continue;
        const auto [vb, ve] = trim_range(content, l.begin + colon + 1, l.end);
        if (ve <= vb || is_placeholder(content.substr(vb, ve - vb))) continue;
        switch (it->second) {
            case HeaderField::Title: ex.slots[StructuredSlot::Title].push_back(make_span(content, vb, ve)); break;
            case HeaderField::Author: ex.slots[StructuredSlot::Author].push_back(make_span(content, vb, ve)); break;
            case HeaderField::PublishTime:
                ex.slots[StructuredSlot::PublishTime].push_back(make_span(content, vb, ve));
                break;
            case HeaderField::Platform: push_split(ex.slots[StructuredSlot::TestPlatform], content, vb, ve); break;
            case HeaderField::Version: push_split(ex.slots[StructuredSlot::SoftwareVersion], content, vb, ve); break;
            case HeaderField::Software: push_split(ex.software, content, vb, ve); break;
        }
    }

    if (ex.slot(StructuredSlot::Title).empty()) {
        // Untagged title: the first meaningful line. Code documents only donate a leading comment.
        const bool code = report.content_kind.is_code();
        for (const auto& l : lines) {
            const auto t = text::trim(l.text);
            if (t.empty() || is_shebang_or_prolog(t)) continue;
            if (code && !is_comment_line(t, report.content_kind.lang)) break;
            const auto p = skip_markers(l.text);
            const auto [b, e] = trim_range(content, l.begin + p, l.end);
            if (e > b && has_letter_or_digit(content.substr(b, e - b))) {
                ex.slots[StructuredSlot::Title].push_back(make_span(content, b, e));
                break;
            }
        }
    }

    if (ex.software.empty() && !ex.slot(StructuredSlot::Title).empty()) {
        std::vector<Span> versions;
        title_software(content, ex.slot(StructuredSlot::Title).front(), ex.software, versions);
        if (ex.slot(StructuredSlot::SoftwareVersion).empty() && !versions.empty()) {
            ex.slots[StructuredSlot::SoftwareVersion] = std::move(versions);
        }
    }

    for (auto it = ex.slots.begin(); it != ex.slots.end();) {
        it = it->second.empty() ? ex.slots.erase(it) : std::next(it);
    }
    return ex;
}

StructuredExtraction extract_structured_aspects(const PocReport& report, const StructuredExtractor& extractor,
                                                Degradation* degradation) {
    static const PatternStructuredExtractor fallback;
    if (&extractor == &fallback || dynamic_cast<const PatternStructuredExtractor*>(&extractor) != nullptr) {
        return extractor.extract(report);
    }
    try {
        auto ex = extractor.extract(report);
        validate_spans(ex, report.raw_content);
        return ex;
    } catch (const std::exception&) {
        if (degradation) degradation->fallbacks.fetch_add(1, std::memory_order_relaxed);
        return fallback.extract(report);
    }
}

PocReport extract_all(PocReport report, const RuleSet& rules, const StructuredExtractor& extractor,
                      Degradation* degradation) {
    if (report.content_kind.tag == ContentKind::Tag::Unclassified) {
        throw ContractError("extract_all: report '" + report.id + "' has not been categorized");
    }
    const std::string_view content = report.raw_content;

    auto cves = extract_cve_ids(report);
    cves.insert(cves.end(), report.cve_ids.begin(), report.cve_ids.end());
    std::sort(cves.begin(), cves.end());
    cves.erase(std::unique(cves.begin(), cves.end()), cves.end());
    report.cve_ids = std::move(cves);

    const auto add = [&](Aspect a, const std::string& v) {
        if (!text::trim(v).empty()) report.aspects.add(a, AspectValue::make(v, Provenance::original()));
    };
    for (const auto& v : extract_trigger_step(content, rules)) add(Aspect::TriggerStep, v);
    for (const auto& v : extract_verification_oracle(content, rules)) add(Aspect::VerificationOracle, v);
    for (const auto& v : extract_references(content, rules)) add(Aspect::Reference, v);

    const auto ex = extract_structured_aspects(report, extractor, degradation);
    for (auto s : kStructuredSlots) {
        for (const auto& sp : ex.slot(s)) add(aspect_of(s), sp.text);
    }
    for (const auto& sp : ex.software) {
        const auto t = text::trim(sp.text);
        if (!t.empty() && std::none_of(report.software.begin(), report.software.end(),
                                       [&](const std::string& x) { return text::fold_equal(x, t); })) {
            report.software.emplace_back(t);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Evaluation

GoldSet parse_gold(std::string_view data) {
    GoldSet gold;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    for (const auto& l : text::split_lines(data)) {
        ++line_no;
        if (text::trim(l.text).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(l.text);
            GoldRecord g;
            g.id = j.at("id").get<std::string>();
            for (const auto& [key, value] : j.items()) {
                if (key == "id") continue;
                const auto a = parse_aspect(key);
                if (!a) throw DataError("gold file line " + std::to_string(line_no) + ": unknown aspect '" + key + "'");
                g.slots[static_cast<std::size_t>(*a)] = value.get<std::vector<std::string>>();
            }
            if (!ids.insert(g.id).second) throw DataError("duplicate gold id '" + g.id + "'");
            gold.push_back(std::move(g));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("gold file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return gold;
}

GoldSet load_gold(const std::filesystem::path& path) { return parse_gold(io::read_file(path)); }

namespace {

void finish(SlotScore& s) {
    const auto predicted = s.true_positives + s.false_positives;
    const auto actual = s.true_positives + s.false_negatives;
    s.zero_predictions = predicted == 0;
    s.zero_gold = actual == 0;
    if (predicted > 0) {
        s.precision = static_cast<double>(s.true_positives) / static_cast<double>(predicted);
    } else {
        s.precision = s.zero_gold ? 1.0 : 0.0;
    }
    if (actual > 0) {
        s.recall = static_cast<double>(s.true_positives) / static_cast<double>(actual);
    } else {
        s.recall = s.zero_predictions ? 1.0 : 0.0;
    }
}

}  // namespace

ExtractionScore evaluate_extraction(const GoldSet& gold, const Corpus& predicted) {
    std::map<std::string, const PocReport*> by_id;
    for (const auto& r : predicted.reports) by_id[r.id] = &r;
    std::set<std::string> gold_ids;
    for (const auto& g : gold) gold_ids.insert(g.id);

    std::string missing, extra;
    for (const auto& id : gold_ids) {
        if (!by_id.count(id)) missing += (missing.empty() ? "" : ", ") + id;
    }
    for (const auto& [id, r] : by_id) {
        if (!gold_ids.count(id)) extra += (extra.empty() ? "" : ", ") + id;
    }
    if (!missing.empty() || !extra.empty()) {
        throw DataError("gold/predicted id mismatch; missing from predicted: [" + missing +
                        "]; not in gold: [" + extra + "]");
    }

    ExtractionScore score;
    for (const auto& g : gold) {
        const auto& r = *by_id.at(g.id);
        for (auto a : kAllAspects) {
            std::map<std::string, long> counts;
            std::size_t gold_n = 0, pred_n = 0;
            for (const auto& v : g.slots[static_cast<std::size_t>(a)]) {
                ++counts[text::fold(v)];
                ++gold_n;
            }
            std::size_t tp = 0;
            for (const auto& v : r.aspects.slot(a)) {
                if (!v.provenance.is_original()) continue;
                ++pred_n;
                auto& c = counts[text::fold(v.text)];
                if (c > 0) {
                    --c;
                    ++tp;
                }
            }
            auto& s = score.slots[static_cast<std::size_t>(a)];
            s.true_positives += tp;
            s.false_positives += pred_n - tp;
            s.false_negatives += gold_n - tp;
        }
    }
    for (auto& s : score.slots) {
        finish(s);
        score.overall.true_positives += s.true_positives;
        score.overall.false_positives += s.false_positives;
        score.overall.false_negatives += s.false_negatives;
    }
    finish(score.overall);
    return score;
}

}  // namespace pocfuse
