#pragma once

#include "pocfuse/corpus.hpp"
#include "pocfuse/similarity.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace pocfuse {

struct LinkBasis {
    enum class Kind { SharedCve, Classifier };
    Kind kind = Kind::SharedCve;
    std::string cve_id;  // SharedCve only

    static LinkBasis shared_cve(std::string cve) { return {Kind::SharedCve, std::move(cve)}; }
    static LinkBasis classifier() { return {Kind::Classifier, {}}; }
    friend bool operator==(const LinkBasis&, const LinkBasis&) = default;
};

struct PairKind {
    enum class Kind { CodePair, TextPair };
    Kind kind = Kind::TextPair;
    LanguageId lang = LanguageId::C_Cpp;  // CodePair only

    static PairKind code(LanguageId l) { return {Kind::CodePair, l}; }
    static PairKind text() { return {Kind::TextPair, LanguageId::C_Cpp}; }
    bool is_code() const { return kind == Kind::CodePair; }
    friend bool operator==(const PairKind& a, const PairKind& b) {
        return a.kind == b.kind && (a.kind != Kind::CodePair || a.lang == b.lang);
    }
};

/// A scored association between two reports. Stored with a < b.
struct PocLink {
    std::string a;
    std::string b;
    LinkBasis basis;
    double similarity = 0.0;
    PairKind kind;
    friend bool operator==(const PocLink&, const PocLink&) = default;
};

/// Pair kind for two reports, or nullopt when they are not comparable (cross-kind or cross-language).
std::optional<PairKind> pair_kind(const PocReport& a, const PocReport& b);

/// cve_id -> ids of reports carrying it (corpus order). Singleton groups are kept.
std::map<std::string, std::vector<std::string>> group_by_cve(const Corpus& corpus);

struct CandidatePair {
    std::string a;
    std::string b;
    PairKind kind;
    friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

/// All same-kind (and, for code, same-language) unordered pairs in a group, canonical a < b.
std::vector<CandidatePair> candidate_pairs_same_cve(const std::vector<std::string>& group, const Corpus& corpus);

struct ScoringModels {
    const EmbeddingModel* embeddings = nullptr;  // required for TextPair scoring
};

struct PairScore {
    double similarity = 0.0;
    bool degenerate = false;  // zero vector on either side
    bool clamped = false;     // negative text cosine clamped to 0
};

/// CodePair: cosine of token-frequency vectors. TextPair: cosine of mean word embeddings, clamped to [0,1].
PairScore score_pair(const PocReport& a, const PocReport& b, const PairKind& kind, const ScoringModels& models);

/// Software names extracted for a and b share an entry (case-insensitive, trimmed, exact).
bool match_software(const PocReport& a, const PocReport& b);

// ---------------------------------------------------------------------------
// Pair classifier

struct PairInput {
    std::string title_a;
    std::string content_a;
    std::string title_b;
    std::string content_b;
};

struct PairVerdict {
    bool same_vulnerability = false;
    double confidence = 0.0;
};

class PairClassifier {
public:
    virtual ~PairClassifier() = default;
    virtual PairVerdict classify(const PairInput& input) const = 0;
    virtual std::string name() const = 0;
};

struct HeuristicClassifierConfig {
    double cutoff = 0.85;
    double title_weight = 0.5;
    double content_weight = 0.5;
};

/// Combined cosine = title_weight * cos(title words) + content_weight * cos(content tokens);
/// verdict is combined >= cutoff and confidence is the combined value.
class HeuristicPairClassifier final : public PairClassifier {
public:
    explicit HeuristicPairClassifier(HeuristicClassifierConfig cfg = {});
    PairVerdict classify(const PairInput& input) const override;
    std::string name() const override { return "heuristic"; }
    const HeuristicClassifierConfig& config() const { return cfg_; }

private:
    HeuristicClassifierConfig cfg_;
};

struct ClassifierDegradation {
    std::atomic<std::size_t> fallbacks{0};
};

PairInput pair_input(const PocReport& a, const PocReport& b);

/// Requires match_software(a, b) (ContractError otherwise). External classifier failures fall back
/// to `fallback` (the heuristic) and count a degradation.
PairVerdict classify_pair(const PairClassifier& classifier, const PocReport& a, const PocReport& b,
                          const PairClassifier* fallback = nullptr, ClassifierDegradation* degradation = nullptr);

// ---------------------------------------------------------------------------
// Training-set builder

struct PairSample {
    std::string a;
    std::string b;
    bool same_vulnerability = false;
    std::string title_a, title_b, content_a, content_b;
    bool software_match = false;
};

struct SplitRatio {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;

    /// "8:1:1" or "0.8:0.1:0.1"; normalized to sum to 1.
    static SplitRatio parse(std::string_view s);
};

struct PairDataset {
    std::vector<PairSample> train;
    std::vector<PairSample> dev;
    std::vector<PairSample> test;
};

/// Samples positives (share >= 1 CVE) and negatives (both CVE-tagged, share none) with a seeded
/// shuffle, then splits each label stratum: floor(train share), floor(dev share), remainder to test.
/// Throws DataError naming the shortfall when too few candidate pairs exist.
PairDataset build_pair_training_set(const Corpus& corpus, std::size_t n_pos, std::size_t n_neg, SplitRatio split,
                                    std::uint64_t seed);

/// Line-delimited {a, b, title_a, title_b, content_a, content_b, label, partition}.
std::string serialize_pair_dataset(const PairDataset& ds);

// ---------------------------------------------------------------------------
// Link graph

struct LinkConfig {
    double code_threshold = 0.5;
    double text_threshold = 0.95;
    bool parallel = true;
};

struct LinkStats {
    std::size_t same_cve_candidates = 0;
    std::size_t classifier_candidates = 0;
    std::size_t degenerate_scores = 0;
    std::size_t clamped_scores = 0;
    std::size_t classifier_fallbacks = 0;
};

double threshold_for(const PairKind& kind, const LinkConfig& cfg);

/// Same-CVE pairs scoring >= their kind's threshold (basis SharedCve) plus software-gated pairs
/// without a shared CVE that the classifier accepts (basis Classifier, similarity = confidence).
/// Sorted by (a, b); SharedCve wins over Classifier for the same pair.
std::vector<PocLink> build_link_graph(const Corpus& corpus, const ScoringModels& models,
                                      const PairClassifier& classifier, const LinkConfig& cfg,
                                      LinkStats* stats = nullptr, const PairClassifier* fallback = nullptr);

/// Line-delimited {a, b, basis, cve_id?, similarity, kind, lang?}.
std::string serialize_links(const std::vector<PocLink>& links);
std::vector<PocLink> deserialize_links(std::string_view data);

/// Embedding texts for TextPair scoring: content of every Text report, in corpus order.
std::vector<std::string> embedding_training_texts(const Corpus& corpus);

}  // namespace pocfuse
