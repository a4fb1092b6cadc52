#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace pocfuse {

/// Raised for unrecoverable input problems (unreadable files, bad format versions, id mismatches).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an operation is called with a violated precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Sources

class SourceId {
public:
    enum class Kind { ExploitDB, PacketStorm, Seebug, CXSecurity, Other };

    SourceId() = default;
    static SourceId known(Kind k);
    static SourceId other(std::string label);

    /// Accepts the canonical names case-insensitively ("exploitdb", "Packet Storm", ...);
    /// anything else becomes Other(label). Throws ContractError on an empty label.
    static SourceId parse(std::string_view name);

    Kind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    std::string name() const;

    friend bool operator==(const SourceId&, const SourceId&) = default;
    friend auto operator<=>(const SourceId&, const SourceId&) = default;

private:
    Kind kind_ = Kind::ExploitDB;
    std::string label_;
};

// ---------------------------------------------------------------------------
// Content kind

enum class LanguageId { C_Cpp, Html, Java, JavaScript, Perl, Php, Python, Ruby, Shell };

inline constexpr std::array<LanguageId, 9> kAllLanguages = {
    LanguageId::C_Cpp, LanguageId::Html,   LanguageId::Java, LanguageId::JavaScript, LanguageId::Perl,
    LanguageId::Php,   LanguageId::Python, LanguageId::Ruby, LanguageId::Shell};

std::string_view to_string(LanguageId lang);
std::optional<LanguageId> parse_language(std::string_view name);

struct ContentKind {
    enum class Tag { Unclassified, Code, Text, Other };

    Tag tag = Tag::Unclassified;
    LanguageId lang = LanguageId::C_Cpp;  // meaningful only for Code

    static ContentKind code(LanguageId l) { return {Tag::Code, l}; }
    static ContentKind text() { return {Tag::Text, LanguageId::C_Cpp}; }

    bool is_code() const { return tag == Tag::Code; }
    bool is_text() const { return tag == Tag::Text; }

    friend bool operator==(const ContentKind& a, const ContentKind& b) {
        return a.tag == b.tag && (a.tag != Tag::Code || a.lang == b.lang);
    }
};

// ---------------------------------------------------------------------------
// Aspects

enum class Aspect {
    TriggerStep,
    VerificationOracle,
    TestPlatform,
    SoftwareVersion,
    Title,
    Author,
    PublishTime,
    Reference,
};

inline constexpr std::size_t kAspectCount = 8;
inline constexpr std::array<Aspect, kAspectCount> kAllAspects = {
    Aspect::TriggerStep, Aspect::VerificationOracle, Aspect::TestPlatform, Aspect::SoftwareVersion,
    Aspect::Title,       Aspect::Author,             Aspect::PublishTime,  Aspect::Reference};

std::string_view to_string(Aspect a);
std::optional<Aspect> parse_aspect(std::string_view name);

enum class AspectCategory { Exploit, Basic };
AspectCategory category_of(Aspect a);

struct Provenance {
    enum class Kind { Original, FromCve, FromPoc };

    Kind kind = Kind::Original;
    std::string cve_id;    // FromCve
    std::string donor_id;  // FromPoc
    double similarity = 0.0;

    static Provenance original() { return {}; }
    static Provenance from_cve(std::string cve) { return {Kind::FromCve, std::move(cve), {}, 0.0}; }
    static Provenance from_poc(std::string donor, double sim);

    bool is_original() const { return kind == Kind::Original; }
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct AspectValue {
    std::string text;
    Provenance provenance;

    /// Trims `text`; throws ContractError if nothing remains.
    static AspectValue make(std::string_view text, Provenance p);
    friend bool operator==(const AspectValue&, const AspectValue&) = default;
};

/// The eight fixed slots. Each slot keeps insertion order and rejects case-insensitive duplicates.
class AspectSet {
public:
    const std::vector<AspectValue>& slot(Aspect a) const { return slots_[index(a)]; }

    /// Appends unless an equal (folded) text is already present. Returns true if appended.
    bool add(Aspect a, AspectValue v);
    bool contains(Aspect a, std::string_view text) const;
    bool has_original(Aspect a) const;
    bool empty(Aspect a) const { return slot(a).empty(); }
    std::size_t filled_count() const;

    friend bool operator==(const AspectSet&, const AspectSet&) = default;

private:
    static std::size_t index(Aspect a) { return static_cast<std::size_t>(a); }
    std::array<std::vector<AspectValue>, kAspectCount> slots_;
};

// ---------------------------------------------------------------------------
// Reports and CVE entries

struct PocReport {
    std::string id;
    SourceId source;
    std::string raw_content;
    ContentKind content_kind;
    /// Raw values of the record's dedicated CVE field, if the record carried one.
    std::optional<std::vector<std::string>> cve_field;
    /// Canonical, sorted, unique CVE ids; populated by extraction.
    std::vector<std::string> cve_ids;
    /// Software names from the record or structured extraction; used for association checks.
    std::vector<std::string> software;
    AspectSet aspects;

    friend bool operator==(const PocReport&, const PocReport&) = default;
};

struct CveProduct {
    std::string name;
    std::vector<std::string> versions;
    friend bool operator==(const CveProduct&, const CveProduct&) = default;
};

struct CveEntry {
    std::string cve_id;
    std::vector<CveProduct> products;
    std::vector<std::string> platforms;
    friend bool operator==(const CveEntry&, const CveEntry&) = default;
};

using CveDb = std::map<std::string, CveEntry>;

struct Corpus {
    std::vector<PocReport> reports;

    const PocReport* find(std::string_view id) const;
    friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Canonical CVE form "CVE-YYYY-NNNN+", upper case; nullopt if `s` is not one.
std::optional<std::string> canonical_cve(std::string_view s);

// ---------------------------------------------------------------------------
// Ingestion

struct IngestWarning {
    std::size_t line = 0;  // 1-based; 0 when not line-specific
    std::string message;
};

struct IngestResult {
    std::vector<PocReport> reports;
    std::vector<IngestWarning> warnings;
    std::size_t skipped = 0;
};

/// Reads a line-delimited JSON report file. Unreadable files throw DataError; malformed
/// records are skipped with a warning. Ids already present in `seen_ids` (if given) are
/// rejected as duplicates, and accepted ids are added to it.
IngestResult ingest_reports(const std::filesystem::path& path, const SourceId& source,
                            std::unordered_set<std::string>* seen_ids = nullptr);

struct CveIngestResult {
    CveDb entries;
    std::vector<IngestWarning> warnings;
};

CveIngestResult ingest_cve_entries(const std::filesystem::path& path);

/// Set-union merge of `from` into `into` (same cve_id).
void merge_cve_entry(CveEntry& into, const CveEntry& from);

// ---------------------------------------------------------------------------
// Persistence

inline constexpr int kCorpusFormatVersion = 1;

std::string serialize_corpus(const Corpus& corpus);
Corpus deserialize_corpus(std::string_view data);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

std::string serialize_cve_db(const CveDb& db);
CveDb deserialize_cve_db(std::string_view data);

/// Checks every corpus invariant; throws ContractError describing the first violation.
void validate_corpus(const Corpus& corpus);

}  // namespace pocfuse
