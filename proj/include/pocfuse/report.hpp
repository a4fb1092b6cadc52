#pragma once

#include "pocfuse/complete.hpp"
#include "pocfuse/corpus.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace pocfuse {

/// Presence counts for one source (or the whole corpus).
struct DeficiencyRow {
    std::string source;
    std::size_t total = 0;
    std::array<std::size_t, kAspectCount> present{};
    std::array<double, kAspectCount> rate{};
    double mean_rate = 0.0;  // unweighted over the eight aspects
};

struct DeficiencyTable {
    std::vector<DeficiencyRow> sources;  // ordered by source
    DeficiencyRow overall;
    bool empty = true;
};

/// An aspect is present when its slot holds at least one Original value.
DeficiencyTable deficiency_stats(const Corpus& corpus);

struct CompletionCell {
    std::size_t pocs_completed = 0;
    std::size_t aspects_completed = 0;
    friend bool operator==(const CompletionCell&, const CompletionCell&) = default;
};

/// One row per (source, slot); columns split by origin kind.
struct CompletionRow {
    std::string source;
    Aspect slot = Aspect::Title;
    CompletionCell from_cve;
    CompletionCell from_poc;
};

struct SourceSummary {
    std::string source;
    std::size_t reports = 0;
    std::size_t reports_with_cve = 0;
    std::size_t distinct_cves = 0;
    std::size_t pocs_completed = 0;  // distinct reports with any record
    std::size_t aspects_completed = 0;
};

struct CompletionTable {
    std::vector<CompletionRow> rows;     // every source in the corpus x every slot
    std::vector<CompletionRow> overall;  // per slot, summed over sources
    CompletionCell total_cve;            // column sums of `overall`
    CompletionCell total_poc;
    std::vector<SourceSummary> summary;  // per source, then "overall"
};

/// Throws DataError for a record whose target is not in the corpus.
CompletionTable completion_stats(const std::vector<CompletionRecord>& records, const Corpus& corpus);

// ---------------------------------------------------------------------------
// Rendering

enum class ReportFormat { Markdown, Csv };

/// "markdown" | "md" | "csv"; anything else throws ContractError.
ReportFormat parse_report_format(std::string_view name);

struct Table {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

Table deficiency_table(const DeficiencyTable& t);
Table completion_table(const CompletionTable& t);
Table summary_table(const CompletionTable& t);

/// Markdown: optional "### title" heading and a pipe table. CSV: header plus rows, RFC 4180 quoting.
std::string render_table(const Table& table, ReportFormat format);

/// Tables rendered in order, separated by one blank line.
std::string render_report(const std::vector<Table>& tables, ReportFormat format);

/// Fixed-point with four decimals.
std::string format_rate(double v);

}  // namespace pocfuse
