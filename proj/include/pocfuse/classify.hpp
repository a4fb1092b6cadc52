#pragma once

#include "pocfuse/corpus.hpp"

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace pocfuse {

struct SignaturePattern {
    std::string source;
    std::regex re;
    int weight = 1;
};

struct LanguageSignature {
    LanguageId language = LanguageId::C_Cpp;
    std::vector<SignaturePattern> patterns;
    int min_hits = 2;
};

/// Per-language detection rules, loaded from the tab-separated table format in data/signatures.tsv.
class SignatureTable {
public:
    /// Throws DataError with the offending line number on bad input.
    static SignatureTable parse(std::string_view table_text);
    static SignatureTable load(const std::filesystem::path& path);

    /// The table compiled into the binary from data/signatures.tsv.
    static const SignatureTable& builtin();

    /// Ordered by LanguageId; languages without patterns are omitted.
    const std::vector<LanguageSignature>& signatures() const { return signatures_; }
    int version() const { return version_; }

private:
    std::vector<LanguageSignature> signatures_;
    int version_ = 0;
};

struct LanguageMatch {
    LanguageId language;
    int hit_count;
    friend bool operator==(const LanguageMatch&, const LanguageMatch&) = default;
};

/// Scores every signature and returns the best one meeting its min_hits. Ties go to the
/// language that comes first in LanguageId order.
std::optional<LanguageMatch> detect_language(std::string_view content,
                                             const SignatureTable& table = SignatureTable::builtin());

/// Requires an Unclassified report (ContractError otherwise).
PocReport categorize(PocReport report, const SignatureTable& table = SignatureTable::builtin());

}  // namespace pocfuse
