#pragma once

#include "pocfuse/corpus.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pocfuse {

/// Sparse token counts. Counts are >= 1 and the empty token never appears.
using TokenFrequencyVector = std::map<std::string, std::uint32_t>;

/// Identifier runs ([A-Za-z0-9_] and non-ASCII bytes) plus single-character operators and
/// punctuation; whitespace separates. Case-sensitive, comments kept.
TokenFrequencyVector tokenize_code(std::string_view content);

/// Lower-cased alphanumeric words of length >= 2, in order.
std::vector<std::string> tokenize_words(std::string_view content);

/// Word-count vector over tokenize_words.
TokenFrequencyVector word_frequencies(std::string_view content);

struct Similarity {
    double value = 0.0;
    /// At least one input had zero norm; value is then 0.
    bool degenerate = false;
};

Similarity cosine_similarity(const TokenFrequencyVector& a, const TokenFrequencyVector& b);

template <typename T>
Similarity cosine_similarity(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw ContractError("cosine_similarity: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(a[i]);
        const double y = static_cast<double>(b[i]);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return {0.0, true};
    return {dot / (std::sqrt(na) * std::sqrt(nb)), false};
}

inline Similarity cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    return cosine_similarity(std::span<const double>(a), std::span<const double>(b));
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling

struct EmbeddingParams {
    int dim = 100;
    int window = 5;
    int negative_samples = 5;
    int epochs = 5;
    double learning_rate = 0.025;  // decays linearly to learning_rate * 1e-4
    int min_count = 2;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EmbeddingModel {
    EmbeddingParams params;
    std::vector<std::string> vocabulary;  // index -> token, sorted by (count desc, token asc)
    std::unordered_map<std::string, std::size_t> index;
    std::vector<float> vectors;  // vocabulary.size() x params.dim, row-major
    std::vector<double> epoch_loss;  // mean loss per training example, per epoch

    std::size_t size() const { return vocabulary.size(); }
    std::span<const float> row(std::size_t i) const {
        return {vectors.data() + i * static_cast<std::size_t>(params.dim), static_cast<std::size_t>(params.dim)};
    }
    const float* find(std::string_view token) const;

    friend bool operator==(const EmbeddingModel& a, const EmbeddingModel& b);
};

/// Trains on tokenize_words(text) for each text. Single-threaded; for a fixed seed the result is
/// bit-identical across runs. Throws DataError if no token survives min_count.
EmbeddingModel train_embeddings(const std::vector<std::string>& texts, const EmbeddingParams& params);

struct TextEmbedding {
    std::vector<double> vector;
    bool all_oov = false;
};

/// Unweighted mean of in-vocabulary word vectors; a zero vector (flagged) if none is known.
TextEmbedding embed_text(const EmbeddingModel& model, std::string_view content);

inline constexpr int kEmbeddingFormatVersion = 1;

/// Text container; floats use shortest round-trip representation, so load(save(m)) == m.
std::string serialize_embeddings(const EmbeddingModel& model);
EmbeddingModel deserialize_embeddings(std::string_view data);
void save_embeddings(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_embeddings(const std::filesystem::path& path);

}  // namespace pocfuse
