#pragma once

#include "pocfuse/corpus.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pocfuse {

// ---------------------------------------------------------------------------
// Rule-based matching

struct RuleSet {
    std::vector<std::string> trigger_keywords;
    std::vector<std::string> oracle_keywords;
    /// Line-level patterns for enumerated step items ("1.", "2)", "a)", "Step 1:").
    std::vector<std::string> step_list_patterns;
    std::string url_pattern;

    static RuleSet defaults();
    /// Throws ContractError when a required keyword is missing.
    void validate() const;
};

/// Trigger-step regions in document order: a keyword line with its following enumerated
/// block, or a standalone list of at least two consecutive step items.
std::vector<std::string> extract_trigger_step(std::string_view content, const RuleSet& rules);

/// Oracle regions: keyword line plus any following indented or fenced block.
std::vector<std::string> extract_verification_oracle(std::string_view content, const RuleSet& rules);

/// http/https/ftp URLs in document order, first occurrence kept, trailing punctuation stripped.
std::vector<std::string> extract_references(std::string_view content, const RuleSet& rules);

// ---------------------------------------------------------------------------
// CVE ids

/// Returns the raw values of the source's dedicated CVE field, or nullopt if the record has none.
using CveFieldLocator = std::function<std::optional<std::vector<std::string>>(const PocReport&)>;

/// The record-field locator used for every source: the ingested `cve_ids` / `cve` field.
CveFieldLocator default_cve_locator();

/// Dedicated field first (bare "YYYY-NNNN" values are accepted there); body scan only when the
/// field is absent. Canonical upper-case ids, deduplicated, in encounter order.
std::vector<std::string> extract_cve_ids(const PocReport& report, const CveFieldLocator& locator = default_cve_locator());

// ---------------------------------------------------------------------------
// Structured (NER-style) extraction

enum class StructuredSlot { TestPlatform, SoftwareVersion, Title, Author, PublishTime };
inline constexpr std::array<StructuredSlot, 5> kStructuredSlots = {
    StructuredSlot::TestPlatform, StructuredSlot::SoftwareVersion, StructuredSlot::Title, StructuredSlot::Author,
    StructuredSlot::PublishTime};

Aspect aspect_of(StructuredSlot s);
std::string_view to_string(StructuredSlot s);
std::optional<StructuredSlot> parse_structured_slot(std::string_view name);

struct Span {
    std::string text;
    std::size_t start = 0;
    std::size_t end = 0;
    friend bool operator==(const Span&, const Span&) = default;
};

struct StructuredExtraction {
    std::map<StructuredSlot, std::vector<Span>> slots;
    /// Software names; not one of the eight aspects, but needed for association checks.
    std::vector<Span> software;

    const std::vector<Span>& slot(StructuredSlot s) const;
    friend bool operator==(const StructuredExtraction&, const StructuredExtraction&) = default;
};

/// Throws ContractError if any span lies outside `content` or its text differs from the covered range.
void validate_spans(const StructuredExtraction& ex, std::string_view content);

class StructuredExtractor {
public:
    virtual ~StructuredExtractor() = default;
    virtual StructuredExtraction extract(const PocReport& report) const = 0;
    virtual std::string name() const = 0;
};

/// Header-line extractor ("Author:", "Date:", "Tested on:" ...), with a first-line title fallback.
class PatternStructuredExtractor final : public StructuredExtractor {
public:
    StructuredExtraction extract(const PocReport& report) const override;
    std::string name() const override { return "pattern"; }
};

/// Run-level degradation counter, shared across threads.
struct Degradation {
    std::atomic<std::size_t> fallbacks{0};
};

/// Runs `extractor`; on an exception or a span-contract violation, falls back to the pattern
/// extractor and bumps `degradation` (if given).
StructuredExtraction extract_structured_aspects(const PocReport& report, const StructuredExtractor& extractor,
                                                Degradation* degradation = nullptr);

/// Populates cve_ids, software, and all eight aspect slots (provenance Original). Idempotent.
/// Requires a categorized report.
PocReport extract_all(PocReport report, const RuleSet& rules, const StructuredExtractor& extractor,
                      Degradation* degradation = nullptr);

// ---------------------------------------------------------------------------
// Evaluation

struct GoldRecord {
    std::string id;
    std::array<std::vector<std::string>, kAspectCount> slots;
};

using GoldSet = std::vector<GoldRecord>;

/// Line-delimited {"id": ..., "<aspect>": [..], ...}.
GoldSet load_gold(const std::filesystem::path& path);
GoldSet parse_gold(std::string_view data);

struct SlotScore {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    double precision = 0.0;
    double recall = 0.0;
    bool zero_predictions = false;
    bool zero_gold = false;
};

struct ExtractionScore {
    std::array<SlotScore, kAspectCount> slots;
    SlotScore overall;  // micro-average

    const SlotScore& slot(Aspect a) const { return slots[static_cast<std::size_t>(a)]; }
};

/// Multiset matching on case-insensitive trimmed text. Both sides must cover the same ids
/// (DataError listing the difference otherwise).
ExtractionScore evaluate_extraction(const GoldSet& gold, const Corpus& predicted);

}  // namespace pocfuse
