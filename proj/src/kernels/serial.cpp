#include "items.hpp"

namespace pocfuse::kernels::serial {

void categorize_all(std::span<PocReport> reports, const SignatureTable& table) {
    for (auto& r : reports) detail::categorize_one(r, table);
}

void extract_all(std::span<PocReport> reports, const RuleSet& rules, const StructuredExtractor& extractor,
                 Degradation* degradation) {
    for (auto& r : reports) detail::extract_one(r, rules, extractor, degradation);
}

std::vector<ReportFeatures> compute_features(std::span<const PocReport> reports, const EmbeddingModel* model) {
    std::vector<ReportFeatures> out;
    out.reserve(reports.size());
    for (const auto& r : reports) out.push_back(detail::features_one(r, model));
    return out;
}

std::vector<PairScore> score_pairs(std::span<const PairRef> pairs, std::span<const ReportFeatures> features) {
    std::vector<PairScore> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(score_features(features[p.a], features[p.b], p.kind));
    return out;
}

std::vector<PairVerdict> classify_pairs(std::span<const PairRef> pairs, std::span<const PocReport> reports,
                                        const PairClassifier& classifier, const PairClassifier* fallback,
                                        ClassifierDegradation* degradation) {
    std::vector<PairVerdict> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(detail::classify_one(p, reports, classifier, fallback, degradation));
    return out;
}

std::vector<std::vector<CompletionRecord>> cve_completion(std::span<PocReport> reports, const CveDb& cves,
                                                          const std::string& run_id) {
    std::vector<std::vector<CompletionRecord>> out(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) out[i] = cve_complete_one(reports[i], cves, run_id);
    return out;
}

}  // namespace pocfuse::kernels::serial
