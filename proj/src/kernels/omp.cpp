#include "items.hpp"

#include <omp.h>

#include <atomic>
#include <exception>
#include <mutex>

namespace pocfuse::kernels::omp {

namespace {

std::atomic<int> g_max_threads{0};

// Runs fn(i) for i in [0, n) across the team; the first exception is rethrown after the loop.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    std::exception_ptr error;
    std::mutex error_mutex;
    const int threads = g_max_threads.load() > 0 ? g_max_threads.load() : omp_get_max_threads();
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

void categorize_all(std::span<PocReport> reports, const SignatureTable& table) {
    parallel_for(reports.size(), [&](std::size_t i) { detail::categorize_one(reports[i], table); });
}

void extract_all(std::span<PocReport> reports, const RuleSet& rules, const StructuredExtractor& extractor,
                 Degradation* degradation) {
    parallel_for(reports.size(), [&](std::size_t i) { detail::extract_one(reports[i], rules, extractor, degradation); });
}

std::vector<ReportFeatures> compute_features(std::span<const PocReport> reports, const EmbeddingModel* model) {
    std::vector<ReportFeatures> out(reports.size());
    parallel_for(reports.size(), [&](std::size_t i) { out[i] = detail::features_one(reports[i], model); });
    return out;
}

std::vector<PairScore> score_pairs(std::span<const PairRef> pairs, std::span<const ReportFeatures> features) {
    std::vector<PairScore> out(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        out[i] = score_features(features[pairs[i].a], features[pairs[i].b], pairs[i].kind);
    });
    return out;
}

std::vector<PairVerdict> classify_pairs(std::span<const PairRef> pairs, std::span<const PocReport> reports,
                                        const PairClassifier& classifier, const PairClassifier* fallback,
                                        ClassifierDegradation* degradation) {
    std::vector<PairVerdict> out(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        out[i] = detail::classify_one(pairs[i], reports, classifier, fallback, degradation);
    });
    return out;
}

std::vector<std::vector<CompletionRecord>> cve_completion(std::span<PocReport> reports, const CveDb& cves,
                                                          const std::string& run_id) {
    std::vector<std::vector<CompletionRecord>> out(reports.size());
    parallel_for(reports.size(), [&](std::size_t i) { out[i] = cve_complete_one(reports[i], cves, run_id); });
    return out;
}

}  // namespace pocfuse::kernels::omp
