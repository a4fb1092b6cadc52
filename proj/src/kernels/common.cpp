#include "items.hpp"

#include <algorithm>

namespace pocfuse::kernels {

PairScore score_features(const ReportFeatures& a, const ReportFeatures& b, const PairKind& kind) {
    PairScore s;
    Similarity sim;
    if (kind.is_code()) {
        sim = cosine_similarity(a.tokens, b.tokens);
    } else {
        if (a.embedding.empty() || b.embedding.empty()) {
            throw ContractError("text pair scoring requires an embedding model");
        }
        sim = cosine_similarity(a.embedding, b.embedding);
        sim.degenerate = sim.degenerate || a.all_oov || b.all_oov;
    }
    s.degenerate = sim.degenerate;
    s.similarity = sim.value;
    if (s.similarity < 0.0) {
        s.similarity = 0.0;
        s.clamped = true;
    }
    s.similarity = std::min(1.0, s.similarity);
    return s;
}

std::vector<CompletionRecord> cve_complete_one(PocReport& report, const CveDb& cves, const std::string& run_id) {
    std::vector<CompletionRecord> out;
    for (const auto& id : report.cve_ids) {
        const auto it = cves.find(id);
        if (it == cves.end() || !verify_association(report, it->second)) continue;
        auto [updated, records] = complete_from_cve(std::move(report), it->second, run_id);
        report = std::move(updated);
        out.insert(out.end(), std::make_move_iterator(records.begin()), std::make_move_iterator(records.end()));
    }
    return out;
}

namespace detail {

ReportFeatures features_one(const PocReport& r, const EmbeddingModel* model) {
    ReportFeatures f;
    if (r.content_kind.is_code()) {
        f.tokens = tokenize_code(r.raw_content);
    } else if (r.content_kind.is_text() && model) {
        auto e = embed_text(*model, r.raw_content);
        f.embedding = std::move(e.vector);
        f.all_oov = e.all_oov;
    }
    return f;
}

PairVerdict classify_one(const PairRef& p, std::span<const PocReport> reports, const PairClassifier& classifier,
                         const PairClassifier* fallback, ClassifierDegradation* degradation) {
    return classify_pair(classifier, reports[p.a], reports[p.b], fallback, degradation);
}

}  // namespace detail

}  // namespace pocfuse::kernels
