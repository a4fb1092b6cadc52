#pragma once

#include "pocfuse/corpus.hpp"
#include "pocfuse/link.hpp"

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace pocfuse {

struct CompletionOrigin {
    enum class Kind { FromCve, FromPoc };
    Kind kind = Kind::FromCve;
    std::string cve_id;  // FromCve
    std::string donor;   // FromPoc
    double similarity = 0.0;
    LinkBasis basis;     // FromPoc

    friend bool operator==(const CompletionOrigin&, const CompletionOrigin&) = default;
};

/// Audit entry for one value appended to one slot of one report.
struct CompletionRecord {
    std::string run_id;
    std::string target;
    Aspect slot = Aspect::Title;
    std::string value;
    CompletionOrigin origin;

    friend bool operator==(const CompletionRecord&, const CompletionRecord&) = default;
};

struct CompletionConfig {
    double code_threshold = 0.5;
    double text_threshold = 0.95;
    std::set<Aspect> poc_aspect_whitelist{kAllAspects.begin(), kAllAspects.end()};
    std::string run_id = "run";
    bool parallel = true;

    void validate() const;
};

/// Vacuously true when the report has no software names; otherwise some name must be a
/// case-insensitive substring of some product name, or vice versa.
bool verify_association(const PocReport& report, const CveEntry& entry);

/// Appends entry versions (of the matching products, or all products when the report names no
/// software) and entry platforms that the report's slots lack. Requires verify_association.
std::pair<PocReport, std::vector<CompletionRecord>> complete_from_cve(PocReport report, const CveEntry& entry,
                                                                      const std::string& run_id = "run");

/// Fills whitelisted empty slots of `target` with the donor's Original values. SharedCve links
/// must meet the threshold for their kind; Classifier links pass on their verdict.
std::pair<PocReport, std::vector<CompletionRecord>> complete_from_poc(PocReport target, const PocReport& donor,
                                                                      const PocLink& link,
                                                                      const CompletionConfig& config);

/// True when the link is usable as a donation edge under `config`.
bool link_passes(const PocLink& link, const CompletionConfig& config);

struct CompletionResult {
    Corpus corpus;
    std::vector<CompletionRecord> records;
};

/// Pass 1: CVE completion per report. Pass 2: PoC donation over links ordered by descending
/// similarity then (a, b); each link fills a from b, then b from a. Donors only ever give
/// Original values, so nothing propagates transitively within a run.
CompletionResult run_completion(const Corpus& corpus, const CveDb& cves, const std::vector<PocLink>& links,
                                const CompletionConfig& config);

/// Re-applies records in order to a pre-run corpus. Throws DataError on an unknown target.
Corpus replay_records(const Corpus& pre_run, const std::vector<CompletionRecord>& records);

/// Line-delimited, fixed field order: run_id, target, slot, value, origin, cve_id | donor, similarity, basis.
std::string serialize_records(const std::vector<CompletionRecord>& records);
std::vector<CompletionRecord> deserialize_records(std::string_view data);

}  // namespace pocfuse
