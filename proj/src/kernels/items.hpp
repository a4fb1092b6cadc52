#pragma once

// Per-item bodies shared by the serial and OpenMP kernels.

#include "pocfuse/kernels.hpp"

namespace pocfuse::kernels::detail {

inline void categorize_one(PocReport& r, const SignatureTable& table) { r = categorize(std::move(r), table); }

inline void extract_one(PocReport& r, const RuleSet& rules, const StructuredExtractor& extractor,
                        Degradation* degradation) {
    r = pocfuse::extract_all(std::move(r), rules, extractor, degradation);
}

ReportFeatures features_one(const PocReport& r, const EmbeddingModel* model);

PairVerdict classify_one(const PairRef& p, std::span<const PocReport> reports, const PairClassifier& classifier,
                         const PairClassifier* fallback, ClassifierDegradation* degradation);

}  // namespace pocfuse::kernels::detail
