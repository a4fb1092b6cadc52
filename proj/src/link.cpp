#include "pocfuse/link.hpp"

#include "pocfuse/kernels.hpp"
#include "pocfuse/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_map>

namespace pocfuse {

namespace {

using Index = std::unordered_map<std::string, std::size_t>;

Index index_corpus(const Corpus& corpus) {
    Index idx;
    for (std::size_t i = 0; i < corpus.reports.size(); ++i) idx.emplace(corpus.reports[i].id, i);
    return idx;
}

bool share_cve(const PocReport& a, const PocReport& b) {
    // cve_ids are sorted.
    auto ia = a.cve_ids.begin();
    auto ib = b.cve_ids.begin();
    while (ia != a.cve_ids.end() && ib != b.cve_ids.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            return true;
        }
    }
    return false;
}

std::string first_title(const PocReport& r) {
    const auto& t = r.aspects.slot(Aspect::Title);
    return t.empty() ? std::string() : t.front().text;
}

}  // namespace

std::optional<PairKind> pair_kind(const PocReport& a, const PocReport& b) {
    if (a.content_kind.is_code() && b.content_kind.is_code() && a.content_kind.lang == b.content_kind.lang) {
        return PairKind::code(a.content_kind.lang);
    }
    if (a.content_kind.is_text() && b.content_kind.is_text()) return PairKind::text();
    return std::nullopt;
}

std::map<std::string, std::vector<std::string>> group_by_cve(const Corpus& corpus) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& r : corpus.reports) {
        for (const auto& c : r.cve_ids) groups[c].push_back(r.id);
    }
    return groups;
}

namespace {

std::vector<CandidatePair> candidates_in_group(const std::vector<std::string>& group, const Corpus& corpus,
                                               const Index& idx) {
    std::vector<CandidatePair> out;
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
            const auto ia = idx.find(group[i]);
            const auto ib = idx.find(group[j]);
            if (ia == idx.end() || ib == idx.end()) throw DataError("group references an unknown report id");
            if (group[i] == group[j]) continue;
            const auto& a = corpus.reports[ia->second];
            const auto& b = corpus.reports[ib->second];
            if (const auto kind = pair_kind(a, b)) {
                if (a.id < b.id) {
                    out.push_back({a.id, b.id, *kind});
                } else {
                    out.push_back({b.id, a.id, *kind});
                }
            }
        }
    }
    return out;
}

}  // namespace

std::vector<CandidatePair> candidate_pairs_same_cve(const std::vector<std::string>& group, const Corpus& corpus) {
    return candidates_in_group(group, corpus, index_corpus(corpus));
}

PairScore score_pair(const PocReport& a, const PocReport& b, const PairKind& kind, const ScoringModels& models) {
    const auto k = pair_kind(a, b);
    if (!k || !(*k == kind)) throw ContractError("score_pair: pair kind does not match the reports");
    if (!kind.is_code() && !models.embeddings) throw ContractError("score_pair: text pairs need an embedding model");
    const auto fa = kernels::serial::compute_features(std::span<const PocReport>(&a, 1), models.embeddings);
    const auto fb = kernels::serial::compute_features(std::span<const PocReport>(&b, 1), models.embeddings);
    return kernels::score_features(fa.front(), fb.front(), kind);
}

bool match_software(const PocReport& a, const PocReport& b) {
    for (const auto& x : a.software) {
        if (text::trim(x).empty()) continue;
        for (const auto& y : b.software) {
            if (text::fold_equal(x, y)) return true;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Classifier

HeuristicPairClassifier::HeuristicPairClassifier(HeuristicClassifierConfig cfg) : cfg_(cfg) {
    if (!(cfg_.cutoff >= 0.0 && cfg_.cutoff <= 1.0)) throw ContractError("classifier cutoff outside [0,1]");
    if (cfg_.title_weight < 0.0 || cfg_.content_weight < 0.0 || cfg_.title_weight + cfg_.content_weight <= 0.0) {
        throw ContractError("classifier weights must be non-negative with a positive sum");
    }
}

PairVerdict HeuristicPairClassifier::classify(const PairInput& in) const {
    const auto content = cosine_similarity(tokenize_code(in.content_a), tokenize_code(in.content_b)).value;
    double combined;
    if (text::trim(in.title_a).empty() || text::trim(in.title_b).empty()) {
        combined = content;
    } else {
        const auto title = cosine_similarity(word_frequencies(in.title_a), word_frequencies(in.title_b)).value;
        combined = (cfg_.title_weight * title + cfg_.content_weight * content) / (cfg_.title_weight + cfg_.content_weight);
    }
    combined = std::clamp(combined, 0.0, 1.0);
    return {combined >= cfg_.cutoff, combined};
}

PairInput pair_input(const PocReport& a, const PocReport& b) {
    return {first_title(a), a.raw_content, first_title(b), b.raw_content};
}

PairVerdict classify_pair(const PairClassifier& classifier, const PocReport& a, const PocReport& b,
                          const PairClassifier* fallback, ClassifierDegradation* degradation) {
    if (!match_software(a, b)) {
        throw ContractError("classify_pair: '" + a.id + "' and '" + b.id + "' do not target the same software");
    }
    const auto input = pair_input(a, b);
    PairVerdict v;
    try {
        v = classifier.classify(input);
    } catch (const std::exception&) {
        if (!fallback) throw;
        if (degradation) degradation->fallbacks.fetch_add(1, std::memory_order_relaxed);
        v = fallback->classify(input);
    }
    if (!std::isfinite(v.confidence)) v.confidence = 0.0;
    v.confidence = std::clamp(v.confidence, 0.0, 1.0);
    return v;
}

// ---------------------------------------------------------------------------
// Training set

SplitRatio SplitRatio::parse(std::string_view s) {
    std::vector<double> parts;
    std::size_t start = 0;
    while (true) {
        const auto colon = s.find(':', start);
        const auto piece = std::string(text::trim(s.substr(start, colon == std::string_view::npos ? s.npos : colon - start)));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(piece, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != piece.size() || piece.empty() || v < 0.0) {
            throw ContractError("bad split ratio '" + std::string(s) + "'");
        }
        parts.push_back(v);
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    if (parts.size() != 3) throw ContractError("split ratio needs three parts: '" + std::string(s) + "'");
    const double sum = parts[0] + parts[1] + parts[2];
    if (!(sum > 0.0)) throw ContractError("split ratio sums to zero");
    return {parts[0] / sum, parts[1] / sum, parts[2] / sum};
}

namespace {

class SampleRng {
public:
    explicit SampleRng(std::uint64_t seed) : engine_(seed) {}
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    template <typename T>
    void shuffle_prefix(std::vector<T>& v, std::size_t k) {
        // Partial Fisher-Yates: the first k elements become a uniform sample.
        for (std::size_t i = 0; i < k && i + 1 < v.size(); ++i) {
            const std::size_t j = i + below(v.size() - i);
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

using IndexPair = std::pair<std::size_t, std::size_t>;

PairSample make_sample(const PocReport& x, const PocReport& y, bool positive) {
    const PocReport& a = x.id < y.id ? x : y;
    const PocReport& b = x.id < y.id ? y : x;
    return {a.id, b.id, positive, first_title(a), first_title(b), a.raw_content, b.raw_content, match_software(a, b)};
}

void split_into(PairDataset& ds, std::vector<PairSample> samples, const SplitRatio& split) {
    const std::size_t n = samples.size();
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * split.train + 1e-9));
    const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::floor(static_cast<double>(n) * split.dev + 1e-9)));
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = i < n_train ? ds.train : (i < n_train + n_dev ? ds.dev : ds.test);
        dst.push_back(std::move(samples[i]));
    }
}

}  // namespace

PairDataset build_pair_training_set(const Corpus& corpus, std::size_t n_pos, std::size_t n_neg, SplitRatio split,
                                    std::uint64_t seed) {
    if (std::abs(split.train + split.dev + split.test - 1.0) > 1e-9 || split.train < 0 || split.dev < 0 ||
        split.test < 0) {
        throw ContractError("split ratios must be non-negative and sum to 1");
    }
    std::vector<std::size_t> tagged;
    for (std::size_t i = 0; i < corpus.reports.size(); ++i) {
        if (!corpus.reports[i].cve_ids.empty()) tagged.push_back(i);
    }
    const auto idx = index_corpus(corpus);
    std::set<IndexPair> positive_set;
    for (const auto& [cve, ids] : group_by_cve(corpus)) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                const auto a = idx.at(ids[i]);
                const auto b = idx.at(ids[j]);
                positive_set.insert({std::min(a, b), std::max(a, b)});
            }
        }
    }
    const std::size_t m = tagged.size();
    const std::size_t all_pairs = m < 2 ? 0 : m * (m - 1) / 2;
    const std::size_t available_neg = all_pairs - positive_set.size();
    if (positive_set.size() < n_pos || available_neg < n_neg) {
        std::string msg = "insufficient candidate pairs:";
        if (positive_set.size() < n_pos) {
            msg += " positives requested " + std::to_string(n_pos) + ", available " +
                   std::to_string(positive_set.size()) + " (short by " + std::to_string(n_pos - positive_set.size()) +
                   ")";
        }
        if (available_neg < n_neg) {
            msg += " negatives requested " + std::to_string(n_neg) + ", available " + std::to_string(available_neg) +
                   " (short by " + std::to_string(n_neg - available_neg) + ")";
        }
        throw DataError(msg);
    }

    SampleRng rng(seed);
    std::vector<IndexPair> positives(positive_set.begin(), positive_set.end());
    rng.shuffle_prefix(positives, n_pos);
    positives.resize(n_pos);

    std::vector<IndexPair> negatives;
    constexpr std::size_t kEnumerateLimit = 4'000'000;
    if (all_pairs <= kEnumerateLimit) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                const IndexPair p{tagged[i], tagged[j]};
                if (!positive_set.count(p)) negatives.push_back(p);
            }
        }
        rng.shuffle_prefix(negatives, n_neg);
        negatives.resize(n_neg);
    } else {
        std::set<IndexPair> chosen;
        while (negatives.size() < n_neg) {
            auto a = tagged[rng.below(m)];
            auto b = tagged[rng.below(m)];
            if (a == b) continue;
            const IndexPair p{std::min(a, b), std::max(a, b)};
            if (positive_set.count(p) || !chosen.insert(p).second) continue;
            negatives.push_back(p);
        }
    }

    const auto materialize = [&](const std::vector<IndexPair>& pairs, bool positive) {
        std::vector<PairSample> out;
        out.reserve(pairs.size());
        for (const auto& [a, b] : pairs) {
            const auto& ra = corpus.reports[a];
            const auto& rb = corpus.reports[b];
            if (share_cve(ra, rb) != positive) throw std::logic_error("pair label disagrees with CVE ground truth");
            out.push_back(make_sample(ra, rb, positive));
        }
        return out;
    };
    PairDataset ds;
    split_into(ds, materialize(positives, true), split);
    split_into(ds, materialize(negatives, false), split);
    return ds;
}

std::string serialize_pair_dataset(const PairDataset& ds) {
    std::string out;
    const auto emit = [&](const std::vector<PairSample>& part, const char* name) {
        for (const auto& s : part) {
            nlohmann::ordered_json j;
            j["a"] = s.a;
            j["b"] = s.b;
            j["title_a"] = s.title_a;
            j["title_b"] = s.title_b;
            j["content_a"] = s.content_a;
            j["content_b"] = s.content_b;
            j["label"] = s.same_vulnerability ? "same_vulnerability" : "different";
            j["partition"] = name;
            j["software_match"] = s.software_match;
            out += j.dump() + "\n";
        }
    };
    emit(ds.train, "train");
    emit(ds.dev, "dev");
    emit(ds.test, "test");
    return out;
}

// ---------------------------------------------------------------------------
// Link graph

double threshold_for(const PairKind& kind, const LinkConfig& cfg) {
    return kind.is_code() ? cfg.code_threshold : cfg.text_threshold;
}

std::vector<PocLink> build_link_graph(const Corpus& corpus, const ScoringModels& models,
                                      const PairClassifier& classifier, const LinkConfig& cfg, LinkStats* stats,
                                      const PairClassifier* fallback) {
    if (!(cfg.code_threshold >= 0.0 && cfg.code_threshold <= 1.0 && cfg.text_threshold >= 0.0 &&
          cfg.text_threshold <= 1.0)) {
        throw ContractError("link thresholds must lie in [0,1]");
    }
    const auto idx = index_corpus(corpus);
    const std::span<const PocReport> reports(corpus.reports);

    // Same-CVE candidates; a pair sharing several CVEs keeps the smallest id.
    std::map<std::pair<std::string, std::string>, std::pair<PairKind, std::string>> same_cve;
    for (const auto& [cve, group] : group_by_cve(corpus)) {
        for (auto& c : candidates_in_group(group, corpus, idx)) {
            same_cve.try_emplace({c.a, c.b}, c.kind, cve);
        }
    }
    std::vector<kernels::PairRef> refs;
    refs.reserve(same_cve.size());
    bool need_embeddings = false;
    for (const auto& [key, val] : same_cve) {
        refs.push_back({idx.at(key.first), idx.at(key.second), val.first});
        need_embeddings = need_embeddings || !val.first.is_code();
    }
    if (need_embeddings && !models.embeddings) throw ContractError("text pairs present but no embedding model given");

    std::vector<kernels::ReportFeatures> features;
    std::vector<PairScore> scores;
    if (cfg.parallel) {
        features = kernels::omp::compute_features(reports, models.embeddings);
        scores = kernels::omp::score_pairs(refs, features);
    } else {
        features = kernels::serial::compute_features(reports, models.embeddings);
        scores = kernels::serial::score_pairs(refs, features);
    }

    std::map<std::pair<std::string, std::string>, PocLink> links;
    LinkStats local;
    local.same_cve_candidates = refs.size();
    std::size_t k = 0;
    for (const auto& [key, val] : same_cve) {
        const auto& s = scores[k++];
        local.degenerate_scores += s.degenerate ? 1 : 0;
        local.clamped_scores += s.clamped ? 1 : 0;
        if (s.similarity >= threshold_for(val.first, cfg)) {
            links.emplace(key, PocLink{key.first, key.second, LinkBasis::shared_cve(val.second), s.similarity, val.first});
        }
    }

    // Classifier candidates: same software name, comparable kinds, no shared CVE.
    std::map<std::string, std::vector<std::size_t>> by_software;
    for (std::size_t i = 0; i < corpus.reports.size(); ++i) {
        std::set<std::string> names;
        for (const auto& s : corpus.reports[i].software) {
            if (!text::trim(s).empty()) names.insert(text::fold(s));
        }
        for (const auto& n : names) by_software[n].push_back(i);
    }
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<kernels::PairRef> cls_refs;
    for (const auto& [name, members] : by_software) {
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                const auto& a = corpus.reports[members[i]];
                const auto& b = corpus.reports[members[j]];
                if (share_cve(a, b)) continue;
                const auto kind = pair_kind(a, b);
                if (!kind) continue;
                const bool a_first = a.id < b.id;
                std::pair<std::string, std::string> key = a_first ? std::pair{a.id, b.id} : std::pair{b.id, a.id};
                if (!seen.insert(key).second) continue;
                cls_refs.push_back({a_first ? members[i] : members[j], a_first ? members[j] : members[i], *kind});
            }
        }
    }
    ClassifierDegradation degradation;
    const auto verdicts = cfg.parallel
                              ? kernels::omp::classify_pairs(cls_refs, reports, classifier, fallback, &degradation)
                              : kernels::serial::classify_pairs(cls_refs, reports, classifier, fallback, &degradation);
    local.classifier_candidates = cls_refs.size();
    local.classifier_fallbacks = degradation.fallbacks.load();
    for (std::size_t i = 0; i < cls_refs.size(); ++i) {
        if (!verdicts[i].same_vulnerability) continue;
        const auto& a = corpus.reports[cls_refs[i].a];
        const auto& b = corpus.reports[cls_refs[i].b];
        links.try_emplace({a.id, b.id},
                          PocLink{a.id, b.id, LinkBasis::classifier(), verdicts[i].confidence, cls_refs[i].kind});
    }

    if (stats) *stats = local;
    std::vector<PocLink> out;
    out.reserve(links.size());
    for (auto& [_, l] : links) out.push_back(std::move(l));
    return out;
}

std::string serialize_links(const std::vector<PocLink>& links) {
    std::string out;
    for (const auto& l : links) {
        nlohmann::ordered_json j;
        j["a"] = l.a;
        j["b"] = l.b;
        j["basis"] = l.basis.kind == LinkBasis::Kind::SharedCve ? "shared_cve" : "classifier";
        if (l.basis.kind == LinkBasis::Kind::SharedCve) j["cve_id"] = l.basis.cve_id;
        j["similarity"] = l.similarity;
        j["kind"] = l.kind.is_code() ? "code" : "text";
        if (l.kind.is_code()) j["lang"] = std::string(to_string(l.kind.lang));
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<PocLink> deserialize_links(std::string_view data) {
    std::vector<PocLink> out;
    std::size_t line_no = 0;
    for (const auto& l : text::split_lines(data)) {
        ++line_no;
        if (text::trim(l.text).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(l.text);
            PocLink link;
            link.a = j.at("a").get<std::string>();
            link.b = j.at("b").get<std::string>();
            const auto basis = j.at("basis").get<std::string>();
            if (basis == "shared_cve") {
                link.basis = LinkBasis::shared_cve(j.at("cve_id").get<std::string>());
            } else if (basis == "classifier") {
                link.basis = LinkBasis::classifier();
            } else {
                throw DataError("unknown link basis '" + basis + "'");
            }
            link.similarity = j.at("similarity").get<double>();
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "code") {
                const auto lang = parse_language(j.at("lang").get<std::string>());
                if (!lang) throw DataError("unknown link language");
                link.kind = PairKind::code(*lang);
            } else if (kind == "text") {
                link.kind = PairKind::text();
            } else {
                throw DataError("unknown link kind '" + kind + "'");
            }
            if (!(link.a < link.b)) throw DataError("link endpoints not in canonical order");
            if (!(link.similarity >= 0.0 && link.similarity <= 1.0)) throw DataError("link similarity outside [0,1]");
            out.push_back(std::move(link));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("links line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<std::string> embedding_training_texts(const Corpus& corpus) {
    std::vector<std::string> texts;
    for (const auto& r : corpus.reports) {
        if (r.content_kind.is_text()) texts.push_back(r.raw_content);
    }
    return texts;
}

}  // namespace pocfuse
