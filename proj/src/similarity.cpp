#include "pocfuse/similarity.hpp"

#include "pocfuse/io.hpp"
#include "pocfuse/text.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <sstream>

namespace pocfuse {

TokenFrequencyVector tokenize_code(std::string_view content) {
    TokenFrequencyVector tf;
    std::size_t i = 0;
    const std::size_t n = content.size();
    while (i < n) {
        const char c = content[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            ++i;
        } else if (text::is_word_char(c)) {
            const auto end = std::find_if_not(content.begin() + static_cast<std::ptrdiff_t>(i), content.end(),
                                              text::is_word_char);
            const auto len = static_cast<std::size_t>(end - content.begin()) - i;
            ++tf[std::string(content.substr(i, len))];
            i += len;
        } else {
            ++tf[std::string(1, c)];
            ++i;
        }
    }
    return tf;
}

std::vector<std::string> tokenize_words(std::string_view content) {
    std::vector<std::string> out;
    std::string cur;
    const auto flush = [&] {
        if (cur.size() >= 2) out.push_back(cur);
        cur.clear();
    };
    for (char c : content) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            cur += c;
        } else if (c >= 'A' && c <= 'Z') {
            cur += static_cast<char>(c - 'A' + 'a');
        } else {
            flush();
        }
    }
    flush();
    return out;
}

TokenFrequencyVector word_frequencies(std::string_view content) {
    TokenFrequencyVector tf;
    for (auto& w : tokenize_words(content)) ++tf[std::move(w)];
    return tf;
}

Similarity cosine_similarity(const TokenFrequencyVector& a, const TokenFrequencyVector& b) {
    double na = 0.0, nb = 0.0, dot = 0.0;
    for (const auto& [_, c] : a) na += static_cast<double>(c) * c;
    for (const auto& [_, c] : b) nb += static_cast<double>(c) * c;
    if (na == 0.0 || nb == 0.0) return {0.0, true};
    // Merge walk over the two sorted maps.
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            dot += static_cast<double>(ia->second) * ib->second;
            ++ia;
            ++ib;
        }
    }
    return {std::min(1.0, dot / (std::sqrt(na) * std::sqrt(nb))), false};
}

// ---------------------------------------------------------------------------
// Embeddings

void EmbeddingParams::validate() const {
    if (dim < 2) throw ContractError("embedding dim must be >= 2");
    if (window < 1) throw ContractError("embedding window must be >= 1");
    if (negative_samples < 1) throw ContractError("negative_samples must be >= 1");
    if (epochs < 1) throw ContractError("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
    if (min_count < 1) throw ContractError("min_count must be >= 1");
}

const float* EmbeddingModel::find(std::string_view token) const {
    const auto it = index.find(std::string(token));
    return it == index.end() ? nullptr : row(it->second).data();
}

bool operator==(const EmbeddingModel& a, const EmbeddingModel& b) {
    const auto& p = a.params;
    const auto& q = b.params;
    return p.dim == q.dim && p.window == q.window && p.negative_samples == q.negative_samples &&
           p.epochs == q.epochs && p.learning_rate == q.learning_rate && p.min_count == q.min_count &&
           p.seed == q.seed && a.vocabulary == b.vocabulary && a.vectors == b.vectors && a.epoch_loss == b.epoch_loss;
}

namespace {

// Portable draws from a fixed-algorithm engine; std:: distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

private:
    std::mt19937_64 engine_;
};

float sigmoid(float x) {
    if (x > 30.f) return 1.f;
    if (x < -30.f) return 0.f;
    return 1.f / (1.f + std::exp(-x));
}

// -log(sigmoid(x)), computed stably.
double neg_log_sigmoid(double x) { return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

}  // namespace

EmbeddingModel train_embeddings(const std::vector<std::string>& texts, const EmbeddingParams& params) {
    params.validate();
    if (texts.empty()) throw ContractError("train_embeddings: no texts");

    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(texts.size());
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts) {
        tokenized.push_back(tokenize_words(t));
        for (const auto& w : tokenized.back()) ++counts[w];
    }

    EmbeddingModel model;
    model.params = params;
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [w, c] : counts) {
        if (c >= static_cast<std::size_t>(params.min_count)) kept.emplace_back(w, c);
    }
    if (kept.empty()) throw DataError("train_embeddings: vocabulary is empty after min_count filtering");
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < kept.size(); ++i) {
        model.vocabulary.push_back(kept[i].first);
        model.index.emplace(kept[i].first, i);
    }

    const std::size_t vocab = kept.size();
    const auto dim = static_cast<std::size_t>(params.dim);
    Rng rng(params.seed);
    model.vectors.resize(vocab * dim);
    for (auto& v : model.vectors) v = static_cast<float>((rng.uniform() - 0.5) / static_cast<double>(dim));
    std::vector<float> context(vocab * dim, 0.f);

    // Negative-sampling distribution: unigram counts raised to 0.75.
    std::vector<double> cumulative(vocab);
    double acc = 0.0;
    for (std::size_t i = 0; i < vocab; ++i) {
        acc += std::pow(static_cast<double>(kept[i].second), 0.75);
        cumulative[i] = acc;
    }
    const auto sample_negative = [&] {
        const double u = rng.uniform() * acc;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), vocab - 1);
    };

    std::vector<std::vector<std::size_t>> sentences;
    std::size_t total_words = 0;
    for (const auto& toks : tokenized) {
        std::vector<std::size_t> s;
        for (const auto& w : toks) {
            if (auto it = model.index.find(w); it != model.index.end()) s.push_back(it->second);
        }
        total_words += s.size();
        if (s.size() >= 2) sentences.push_back(std::move(s));
    }

    const double total = static_cast<double>(total_words) * params.epochs + 1.0;
    double processed = 0.0;
    std::vector<float> grad(dim);
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t pairs = 0;
        for (const auto& s : sentences) {
            for (std::size_t pos = 0; pos < s.size(); ++pos) {
                const double lr = params.learning_rate * std::max(1e-4, 1.0 - processed / total);
                processed += 1.0;
                const auto shrink = rng.below(static_cast<std::size_t>(params.window));
                const auto reach = static_cast<std::size_t>(params.window) - shrink;
                const std::size_t lo = pos >= reach ? pos - reach : 0;
                const std::size_t hi = std::min(s.size() - 1, pos + reach);
                float* in = model.vectors.data() + s[pos] * dim;
                for (std::size_t c = lo; c <= hi; ++c) {
                    if (c == pos) continue;
                    std::fill(grad.begin(), grad.end(), 0.f);
                    for (int k = 0; k <= params.negative_samples; ++k) {
                        std::size_t target;
                        float label;
                        if (k == 0) {
                            target = s[c];
                            label = 1.f;
                        } else {
                            target = sample_negative();
                            if (target == s[c]) continue;
                            label = 0.f;
                        }
                        float* out = context.data() + target * dim;
                        float dot = 0.f;
                        for (std::size_t d = 0; d < dim; ++d) dot += in[d] * out[d];
                        loss_sum += neg_log_sigmoid(label > 0.f ? dot : -dot);
                        const float g = (label - sigmoid(dot)) * static_cast<float>(lr);
                        for (std::size_t d = 0; d < dim; ++d) grad[d] += g * out[d];
                        for (std::size_t d = 0; d < dim; ++d) out[d] += g * in[d];
                    }
                    for (std::size_t d = 0; d < dim; ++d) in[d] += grad[d];
                    ++pairs;
                }
            }
        }
        model.epoch_loss.push_back(pairs ? loss_sum / static_cast<double>(pairs) : 0.0);
    }
    return model;
}

TextEmbedding embed_text(const EmbeddingModel& model, std::string_view content) {
    const auto dim = static_cast<std::size_t>(model.params.dim);
    TextEmbedding e;
    e.vector.assign(dim, 0.0);
    std::size_t n = 0;
    for (const auto& w : tokenize_words(content)) {
        const float* v = model.find(w);
        if (!v) continue;
        for (std::size_t d = 0; d < dim; ++d) e.vector[d] += v[d];
        ++n;
    }
    if (n == 0) {
        e.all_oov = true;
        return e;
    }
    for (auto& x : e.vector) x /= static_cast<double>(n);
    return e;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr std::string_view kModelMagic = "pocfuse-embeddings";

template <typename T>
void put_number(std::string& out, T v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

template <typename T>
T get_number(std::istringstream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw DataError(std::string("embedding model: missing ") + what);
    T v{};
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size()) {
        throw DataError(std::string("embedding model: bad ") + what + " '" + tok + "'");
    }
    return v;
}

}  // namespace

std::string serialize_embeddings(const EmbeddingModel& model) {
    const auto& p = model.params;
    std::string out;
    out += std::string(kModelMagic) + " " + std::to_string(kEmbeddingFormatVersion) + "\n";
    out += "params " + std::to_string(p.dim) + " " + std::to_string(p.window) + " " +
           std::to_string(p.negative_samples) + " " + std::to_string(p.epochs) + " ";
    put_number(out, p.learning_rate);
    out += " " + std::to_string(p.min_count) + " " + std::to_string(p.seed) + "\n";
    out += "loss " + std::to_string(model.epoch_loss.size());
    for (double l : model.epoch_loss) {
        out += ' ';
        put_number(out, l);
    }
    out += "\nvocab " + std::to_string(model.size()) + "\n";
    for (std::size_t i = 0; i < model.size(); ++i) {
        out += model.vocabulary[i];
        for (float v : model.row(i)) {
            out += ' ';
            put_number(out, v);
        }
        out += '\n';
    }
    return out;
}

EmbeddingModel deserialize_embeddings(std::string_view data) {
    std::istringstream in{std::string(data)};
    std::string word;
    if (!(in >> word) || word != kModelMagic) throw DataError("not an embedding model file");
    const int version = get_number<int>(in, "version");
    if (version != kEmbeddingFormatVersion) {
        throw DataError("embedding model format version " + std::to_string(version) +
                        " does not match supported version " + std::to_string(kEmbeddingFormatVersion));
    }
    EmbeddingModel m;
    auto& p = m.params;
    if (!(in >> word) || word != "params") throw DataError("embedding model: missing params");
    p.dim = get_number<int>(in, "dim");
    p.window = get_number<int>(in, "window");
    p.negative_samples = get_number<int>(in, "negative_samples");
    p.epochs = get_number<int>(in, "epochs");
    p.learning_rate = get_number<double>(in, "learning_rate");
    p.min_count = get_number<int>(in, "min_count");
    p.seed = get_number<std::uint64_t>(in, "seed");
    p.validate();
    if (!(in >> word) || word != "loss") throw DataError("embedding model: missing loss");
    const auto n_loss = get_number<std::size_t>(in, "loss count");
    for (std::size_t i = 0; i < n_loss; ++i) m.epoch_loss.push_back(get_number<double>(in, "loss"));
    if (!(in >> word) || word != "vocab") throw DataError("embedding model: missing vocab");
    const auto n = get_number<std::size_t>(in, "vocab size");
    m.vectors.reserve(n * static_cast<std::size_t>(p.dim));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> word)) throw DataError("embedding model: truncated vocabulary");
        if (!m.index.emplace(word, i).second) throw DataError("embedding model: duplicate token '" + word + "'");
        m.vocabulary.push_back(word);
        for (int d = 0; d < p.dim; ++d) m.vectors.push_back(get_number<float>(in, "vector component"));
    }
    return m;
}

void save_embeddings(const EmbeddingModel& model, const std::filesystem::path& path) {
    io::write_file(path, serialize_embeddings(model));
}

EmbeddingModel load_embeddings(const std::filesystem::path& path) {
    return deserialize_embeddings(io::read_file(path));
}

}  // namespace pocfuse
