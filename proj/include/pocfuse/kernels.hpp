#pragma once

// Batch kernels behind the pipeline stages. Every kernel exists twice with identical
// signatures: `serial` is the reference, `omp` spreads the independent per-item work over
// OpenMP threads. Outputs are written per index, so both produce identical results.

#include "pocfuse/classify.hpp"
#include "pocfuse/complete.hpp"
#include "pocfuse/extract.hpp"
#include "pocfuse/link.hpp"
#include "pocfuse/similarity.hpp"

#include <span>
#include <vector>

namespace pocfuse::kernels {

struct PairRef {
    std::size_t a = 0;  // corpus indices
    std::size_t b = 0;
    PairKind kind;
};

/// Per-report vectors needed for pair scoring.
struct ReportFeatures {
    TokenFrequencyVector tokens;    // code reports
    std::vector<double> embedding;  // text reports, when a model is available
    bool all_oov = false;
};

/// Scores a pair from precomputed features; same result as score_pair on the reports.
PairScore score_features(const ReportFeatures& a, const ReportFeatures& b, const PairKind& kind);

/// Per-report CVE completion (pass 1 of run_completion).
std::vector<CompletionRecord> cve_complete_one(PocReport& report, const CveDb& cves, const std::string& run_id);

namespace serial {

void categorize_all(std::span<PocReport> reports, const SignatureTable& table);
void extract_all(std::span<PocReport> reports, const RuleSet& rules, const StructuredExtractor& extractor,
                 Degradation* degradation);
std::vector<ReportFeatures> compute_features(std::span<const PocReport> reports, const EmbeddingModel* model);
std::vector<PairScore> score_pairs(std::span<const PairRef> pairs, std::span<const ReportFeatures> features);
std::vector<PairVerdict> classify_pairs(std::span<const PairRef> pairs, std::span<const PocReport> reports,
                                        const PairClassifier& classifier, const PairClassifier* fallback,
                                        ClassifierDegradation* degradation);
std::vector<std::vector<CompletionRecord>> cve_completion(std::span<PocReport> reports, const CveDb& cves,
                                                          const std::string& run_id);

}  // namespace serial

namespace omp {

void categorize_all(std::span<PocReport> reports, const SignatureTable& table);
void extract_all(std::span<PocReport> reports, const RuleSet& rules, const StructuredExtractor& extractor,
                 Degradation* degradation);
std::vector<ReportFeatures> compute_features(std::span<const PocReport> reports, const EmbeddingModel* model);
std::vector<PairScore> score_pairs(std::span<const PairRef> pairs, std::span<const ReportFeatures> features);
std::vector<PairVerdict> classify_pairs(std::span<const PairRef> pairs, std::span<const PocReport> reports,
                                        const PairClassifier& classifier, const PairClassifier* fallback,
                                        ClassifierDegradation* degradation);
std::vector<std::vector<CompletionRecord>> cve_completion(std::span<PocReport> reports, const CveDb& cves,
                                                          const std::string& run_id);

/// Caps the OpenMP team size used by these kernels (0 = runtime default).
void set_max_threads(int n);

}  // namespace omp

}  // namespace pocfuse::kernels
