#include "pocfuse/corpus.hpp"

#include "pocfuse/io.hpp"
#include "pocfuse/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <regex>
#include <sstream>

namespace pocfuse {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// SourceId

SourceId SourceId::known(Kind k) {
    if (k == Kind::Other) throw ContractError("SourceId::known called with Kind::Other");
    SourceId s;
    s.kind_ = k;
    return s;
}

SourceId SourceId::other(std::string label) {
    if (text::trim(label).empty()) throw ContractError("Other source requires a non-empty label");
    SourceId s;
    s.kind_ = Kind::Other;
    s.label_ = std::string(text::trim(label));
    return s;
}

SourceId SourceId::parse(std::string_view name) {
    std::string key;
    for (char c : text::fold(name)) {
        if (c != ' ' && c != '-' && c != '_' && c != '.') key += c;
    }
    if (key == "exploitdb" || key == "edb") return known(Kind::ExploitDB);
    if (key == "packetstorm" || key == "packetstormsecurity") return known(Kind::PacketStorm);
    if (key == "seebug") return known(Kind::Seebug);
    if (key == "cxsecurity") return known(Kind::CXSecurity);
    return other(std::string(name));
}

std::string SourceId::name() const {
    switch (kind_) {
        case Kind::ExploitDB: return "ExploitDB";
        case Kind::PacketStorm: return "PacketStorm";
        case Kind::Seebug: return "Seebug";
        case Kind::CXSecurity: return "CXSecurity";
        case Kind::Other: return label_;
    }
    return label_;
}

// ---------------------------------------------------------------------------
// Enumerations

namespace {

constexpr std::array<std::string_view, 9> kLanguageNames = {
    "c_cpp", "html", "java", "javascript", "perl", "php", "python", "ruby", "shell"};

constexpr std::array<std::string_view, kAspectCount> kAspectNames = {
    "trigger_step", "verification_oracle", "test_platform", "software_version",
    "title",        "author",              "publish_time",  "reference"};

}  // namespace

std::string_view to_string(LanguageId lang) { return kLanguageNames[static_cast<std::size_t>(lang)]; }

std::optional<LanguageId> parse_language(std::string_view name) {
    const auto key = text::fold(name);
    for (std::size_t i = 0; i < kLanguageNames.size(); ++i) {
        if (kLanguageNames[i] == key) return kAllLanguages[i];
    }
    if (key == "c" || key == "cpp" || key == "c++" || key == "c/c++") return LanguageId::C_Cpp;
    if (key == "js") return LanguageId::JavaScript;
    if (key == "sh" || key == "bash") return LanguageId::Shell;
    return std::nullopt;
}

std::string_view to_string(Aspect a) { return kAspectNames[static_cast<std::size_t>(a)]; }

std::optional<Aspect> parse_aspect(std::string_view name) {
    const auto key = text::fold(name);
    for (std::size_t i = 0; i < kAspectNames.size(); ++i) {
        if (kAspectNames[i] == key) return kAllAspects[i];
    }
    return std::nullopt;
}

AspectCategory category_of(Aspect a) {
    switch (a) {
        case Aspect::TriggerStep:
        case Aspect::VerificationOracle:
        case Aspect::TestPlatform:
        case Aspect::SoftwareVersion: return AspectCategory::Exploit;
        default: return AspectCategory::Basic;
    }
}

// ---------------------------------------------------------------------------
// Aspect values

Provenance Provenance::from_poc(std::string donor, double sim) {
    if (!(sim >= 0.0 && sim <= 1.0)) throw ContractError("FromPoc similarity outside [0,1]");
    return {Kind::FromPoc, {}, std::move(donor), sim};
}

AspectValue AspectValue::make(std::string_view t, Provenance p) {
    const auto trimmed = text::trim(t);
    if (trimmed.empty()) throw ContractError("aspect value text is empty after trimming");
    return {std::string(trimmed), std::move(p)};
}

bool AspectSet::add(Aspect a, AspectValue v) {
    if (contains(a, v.text)) return false;
    slots_[index(a)].push_back(std::move(v));
    return true;
}

bool AspectSet::contains(Aspect a, std::string_view t) const {
    const auto key = text::fold(t);
    const auto& s = slot(a);
    return std::any_of(s.begin(), s.end(), [&](const AspectValue& v) { return text::fold(v.text) == key; });
}

bool AspectSet::has_original(Aspect a) const {
    const auto& s = slot(a);
    return std::any_of(s.begin(), s.end(), [](const AspectValue& v) { return v.provenance.is_original(); });
}

std::size_t AspectSet::filled_count() const {
    return static_cast<std::size_t>(
        std::count_if(slots_.begin(), slots_.end(), [](const auto& s) { return !s.empty(); }));
}

const PocReport* Corpus::find(std::string_view id) const {
    for (const auto& r : reports) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

std::optional<std::string> canonical_cve(std::string_view s) {
    static const std::regex re(R"(CVE-\d{4}-\d{4,})", std::regex::icase);
    const auto t = text::trim(s);
    if (!std::regex_match(t.begin(), t.end(), re)) return std::nullopt;
    std::string out(t);
    for (char& c : out) {
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report ingestion

namespace {

// A field that may be given either as a single string or as a list of strings.
std::vector<std::string> string_list(const json& rec, const char* key) {
    std::vector<std::string> out;
    const auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return out;
    if (it->is_string()) {
        out.push_back(it->get<std::string>());
    } else if (it->is_array()) {
        for (const auto& v : *it) {
            if (!v.is_string()) throw std::invalid_argument(std::string("field '") + key + "' must hold strings");
            out.push_back(v.get<std::string>());
        }
    } else {
        throw std::invalid_argument(std::string("field '") + key + "' must be a string or list");
    }
    return out;
}

std::string required_string(const json& rec, const char* key) {
    const auto it = rec.find(key);
    if (it == rec.end() || !it->is_string()) {
        throw std::invalid_argument(std::string("missing or non-string required field '") + key + "'");
    }
    return it->get<std::string>();
}

void add_prefilled(PocReport& r, Aspect a, const std::vector<std::string>& values) {
    for (const auto& v : values) {
        if (text::trim(v).empty()) continue;
        r.aspects.add(a, AspectValue::make(v, Provenance::original()));
    }
}

PocReport parse_report_record(const json& rec, const SourceId& source) {
    if (!rec.is_object()) throw std::invalid_argument("record is not an object");
    PocReport r;
    r.id = std::string(text::trim(required_string(rec, "id")));
    if (r.id.empty()) throw std::invalid_argument("empty id");
    const auto declared = SourceId::parse(required_string(rec, "source"));
    if (declared != source) {
        throw std::invalid_argument("record source '" + declared.name() + "' does not match file source '" +
                                    source.name() + "'");
    }
    r.source = source;
    r.raw_content = required_string(rec, "content");

    add_prefilled(r, Aspect::Title, string_list(rec, "title"));
    add_prefilled(r, Aspect::Author, string_list(rec, "author"));
    add_prefilled(r, Aspect::PublishTime, string_list(rec, "publish_time"));
    add_prefilled(r, Aspect::TestPlatform, string_list(rec, "platform"));
    add_prefilled(r, Aspect::SoftwareVersion, string_list(rec, "version"));
    add_prefilled(r, Aspect::Reference, string_list(rec, "references"));

    if (rec.contains("cve_ids") || rec.contains("cve")) {
        auto cves = string_list(rec, "cve_ids");
        for (auto& c : string_list(rec, "cve")) cves.push_back(std::move(c));
        r.cve_field = std::move(cves);
    }
    for (auto key : {"software", "product"}) {
        for (const auto& s : string_list(rec, key)) {
            const auto t = text::trim(s);
            if (!t.empty() && std::none_of(r.software.begin(), r.software.end(),
                                           [&](const std::string& x) { return text::fold_equal(x, t); })) {
                r.software.emplace_back(t);
            }
        }
    }
    return r;
}

template <typename Fn>
void for_each_record(const std::string& data, Fn&& fn) {
    std::size_t line_no = 0;
    std::istringstream in(data);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        fn(line_no, text::sanitize_utf8(line));
    }
}

}  // namespace

IngestResult ingest_reports(const std::filesystem::path& path, const SourceId& source,
                            std::unordered_set<std::string>* seen_ids) {
    const std::string data = io::read_file(path);
    IngestResult result;
    std::unordered_set<std::string> local;
    auto& seen = seen_ids ? *seen_ids : local;
    for_each_record(data, [&](std::size_t line_no, const std::string& line) {
        try {
            auto report = parse_report_record(json::parse(line), source);
            if (!seen.insert(report.id).second) {
                result.warnings.push_back({line_no, "duplicate report id '" + report.id + "' rejected"});
                ++result.skipped;
                return;
            }
            result.reports.push_back(std::move(report));
        } catch (const std::exception& e) {
            result.warnings.push_back({line_no, std::string("malformed record: ") + e.what()});
            ++result.skipped;
        }
    });
    return result;
}

// ---------------------------------------------------------------------------
// CVE ingestion

namespace {

void sorted_fold_unique(std::vector<std::string>& v) {
    std::vector<std::string> out;
    for (auto& s : v) {
        auto t = std::string(text::trim(s));
        if (t.empty()) continue;
        if (std::none_of(out.begin(), out.end(), [&](const std::string& x) { return text::fold_equal(x, t); })) {
            out.push_back(std::move(t));
        }
    }
    std::sort(out.begin(), out.end());
    v = std::move(out);
}

void normalize_entry(CveEntry& e) {
    std::vector<CveProduct> merged;
    for (auto& p : e.products) {
        auto it = std::find_if(merged.begin(), merged.end(),
                               [&](const CveProduct& m) { return text::fold_equal(m.name, p.name); });
        if (it == merged.end()) {
            merged.push_back({std::string(text::trim(p.name)), p.versions});
        } else {
            it->versions.insert(it->versions.end(), p.versions.begin(), p.versions.end());
        }
    }
    for (auto& p : merged) sorted_fold_unique(p.versions);
    std::sort(merged.begin(), merged.end(), [](const CveProduct& a, const CveProduct& b) { return a.name < b.name; });
    e.products = std::move(merged);
    sorted_fold_unique(e.platforms);
}

CveEntry parse_cve_record(const json& rec) {
    if (!rec.is_object()) throw std::invalid_argument("record is not an object");
    CveEntry e;
    const auto raw_id = required_string(rec, "cve_id");
    const auto id = canonical_cve(raw_id);
    if (!id) throw std::invalid_argument("malformed cve_id '" + raw_id + "'");
    e.cve_id = *id;
    const auto products = rec.find("products");
    if (products == rec.end() || !products->is_array() || products->empty()) {
        throw std::invalid_argument(e.cve_id + " has an empty products list");
    }
    for (const auto& p : *products) {
        if (!p.is_object()) throw std::invalid_argument("product entry is not an object");
        CveProduct prod;
        prod.name = std::string(text::trim(required_string(p, "name")));
        if (prod.name.empty()) throw std::invalid_argument(e.cve_id + " has a product with an empty name");
        prod.versions = string_list(p, "versions");
        e.products.push_back(std::move(prod));
    }
    e.platforms = string_list(rec, "platforms");
    normalize_entry(e);
    return e;
}

}  // namespace

void merge_cve_entry(CveEntry& into, const CveEntry& from) {
    into.products.insert(into.products.end(), from.products.begin(), from.products.end());
    into.platforms.insert(into.platforms.end(), from.platforms.begin(), from.platforms.end());
    normalize_entry(into);
}

CveIngestResult ingest_cve_entries(const std::filesystem::path& path) {
    const std::string data = io::read_file(path);
    CveIngestResult result;
    for_each_record(data, [&](std::size_t line_no, const std::string& line) {
        try {
            auto entry = parse_cve_record(json::parse(line));
            auto [it, inserted] = result.entries.try_emplace(entry.cve_id, entry);
            if (!inserted) merge_cve_entry(it->second, entry);
        } catch (const std::exception& e) {
            result.warnings.push_back({line_no, std::string("skipped CVE record: ") + e.what()});
        }
    });
    return result;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr std::string_view kCorpusFormat = "pocfuse-corpus";
constexpr std::string_view kCveFormat = "pocfuse-cves";

std::string_view origin_name(Provenance::Kind k) {
    switch (k) {
        case Provenance::Kind::Original: return "original";
        case Provenance::Kind::FromCve: return "cve";
        case Provenance::Kind::FromPoc: return "poc";
    }
    return "original";
}

ordered_json kind_to_json(const ContentKind& k) {
    ordered_json j;
    switch (k.tag) {
        case ContentKind::Tag::Unclassified: j["tag"] = "unclassified"; break;
        case ContentKind::Tag::Code:
            j["tag"] = "code";
            j["lang"] = std::string(to_string(k.lang));
            break;
        case ContentKind::Tag::Text: j["tag"] = "text"; break;
        case ContentKind::Tag::Other: j["tag"] = "other"; break;
    }
    return j;
}

ContentKind kind_from_json(const json& j) {
    const auto tag = j.at("tag").get<std::string>();
    if (tag == "unclassified") return {};
    if (tag == "text") return ContentKind::text();
    if (tag == "other") return {ContentKind::Tag::Other, LanguageId::C_Cpp};
    if (tag == "code") {
        const auto lang = parse_language(j.at("lang").get<std::string>());
        if (!lang) throw DataError("unknown language in persisted corpus");
        return ContentKind::code(*lang);
    }
    throw DataError("unknown content kind '" + tag + "'");
}

ordered_json value_to_json(const AspectValue& v) {
    ordered_json j;
    j["text"] = v.text;
    j["origin"] = std::string(origin_name(v.provenance.kind));
    if (v.provenance.kind == Provenance::Kind::FromCve) j["cve_id"] = v.provenance.cve_id;
    if (v.provenance.kind == Provenance::Kind::FromPoc) {
        j["donor"] = v.provenance.donor_id;
        j["similarity"] = v.provenance.similarity;
    }
    return j;
}

AspectValue value_from_json(const json& j) {
    const auto origin = j.at("origin").get<std::string>();
    Provenance p;
    if (origin == "cve") {
        p = Provenance::from_cve(j.at("cve_id").get<std::string>());
    } else if (origin == "poc") {
        p = Provenance::from_poc(j.at("donor").get<std::string>(), j.at("similarity").get<double>());
    } else if (origin != "original") {
        throw DataError("unknown provenance '" + origin + "'");
    }
    return AspectValue::make(j.at("text").get<std::string>(), std::move(p));
}

ordered_json report_to_json(const PocReport& r) {
    ordered_json j;
    j["id"] = r.id;
    j["source"] = r.source.name();
    j["content_kind"] = kind_to_json(r.content_kind);
    if (r.cve_field) j["cve_field"] = *r.cve_field;
    j["cve_ids"] = r.cve_ids;
    j["software"] = r.software;
    ordered_json aspects = ordered_json::object();
    for (auto a : kAllAspects) {
        ordered_json values = ordered_json::array();
        for (const auto& v : r.aspects.slot(a)) values.push_back(value_to_json(v));
        aspects[std::string(to_string(a))] = std::move(values);
    }
    j["aspects"] = std::move(aspects);
    j["content"] = r.raw_content;
    return j;
}

PocReport report_from_json(const json& j) {
    PocReport r;
    r.id = j.at("id").get<std::string>();
    r.source = SourceId::parse(j.at("source").get<std::string>());
    r.content_kind = kind_from_json(j.at("content_kind"));
    if (j.contains("cve_field")) r.cve_field = j.at("cve_field").get<std::vector<std::string>>();
    r.cve_ids = j.at("cve_ids").get<std::vector<std::string>>();
    r.software = j.at("software").get<std::vector<std::string>>();
    const auto& aspects = j.at("aspects");
    for (auto a : kAllAspects) {
        for (const auto& v : aspects.at(std::string(to_string(a)))) r.aspects.add(a, value_from_json(v));
    }
    r.raw_content = j.at("content").get<std::string>();
    return r;
}

void check_header(const json& header, std::string_view format) {
    if (!header.is_object() || header.value("format", "") != format) {
        throw DataError("not a " + std::string(format) + " file");
    }
    const int version = header.value("version", -1);
    if (version != kCorpusFormatVersion) {
        throw DataError(std::string(format) + " format version " + std::to_string(version) +
                        " does not match supported version " + std::to_string(kCorpusFormatVersion));
    }
}

template <typename Fn>
void for_each_persisted_line(std::string_view data, std::string_view format, Fn&& fn) {
    std::size_t pos = 0;
    bool header_seen = false;
    std::size_t expected = 0, count = 0;
    while (pos < data.size()) {
        auto nl = data.find('\n', pos);
        if (nl == std::string_view::npos) nl = data.size();
        const auto line = data.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("corrupt " + std::string(format) + " file: " + e.what());
        }
        if (!header_seen) {
            check_header(j, format);
            expected = j.value("count", std::size_t{0});
            header_seen = true;
            continue;
        }
        try {
            fn(j);
        } catch (const json::exception& e) {
            throw DataError("corrupt " + std::string(format) + " record: " + e.what());
        }
        ++count;
    }
    if (!header_seen) throw DataError("empty " + std::string(format) + " file (missing header)");
    if (count != expected) {
        throw DataError(std::string(format) + " record count " + std::to_string(count) + " != header count " +
                        std::to_string(expected));
    }
}

}  // namespace

std::string serialize_corpus(const Corpus& corpus) {
    ordered_json header;
    header["format"] = std::string(kCorpusFormat);
    header["version"] = kCorpusFormatVersion;
    header["count"] = corpus.reports.size();
    std::string out = header.dump() + "\n";
    for (const auto& r : corpus.reports) out += report_to_json(r).dump() + "\n";
    return out;
}

Corpus deserialize_corpus(std::string_view data) {
    Corpus c;
    for_each_persisted_line(data, kCorpusFormat, [&](const json& j) { c.reports.push_back(report_from_json(j)); });
    validate_corpus(c);
    return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    validate_corpus(corpus);
    io::write_file(path, serialize_corpus(corpus));
}

Corpus load_corpus(const std::filesystem::path& path) { return deserialize_corpus(io::read_file(path)); }

std::string serialize_cve_db(const CveDb& db) {
    ordered_json header;
    header["format"] = std::string(kCveFormat);
    header["version"] = kCorpusFormatVersion;
    header["count"] = db.size();
    std::string out = header.dump() + "\n";
    for (const auto& [id, e] : db) {
        ordered_json j;
        j["cve_id"] = e.cve_id;
        ordered_json products = ordered_json::array();
        for (const auto& p : e.products) {
            ordered_json pj;
            pj["name"] = p.name;
            pj["versions"] = p.versions;
            products.push_back(std::move(pj));
        }
        j["products"] = std::move(products);
        j["platforms"] = e.platforms;
        out += j.dump() + "\n";
    }
    return out;
}

CveDb deserialize_cve_db(std::string_view data) {
    CveDb db;
    for_each_persisted_line(data, kCveFormat, [&](const json& j) {
        auto e = parse_cve_record(j);
        db.emplace(e.cve_id, std::move(e));
    });
    return db;
}

void validate_corpus(const Corpus& corpus) {
    std::unordered_set<std::string> ids;
    for (const auto& r : corpus.reports) {
        if (r.id.empty()) throw ContractError("report with empty id");
        if (!ids.insert(r.id).second) throw ContractError("duplicate report id '" + r.id + "'");
        if (r.source.kind() == SourceId::Kind::Other && r.source.label().empty()) {
            throw ContractError(r.id + ": Other source without label");
        }
        for (const auto& c : r.cve_ids) {
            const auto canon = canonical_cve(c);
            if (!canon || *canon != c) throw ContractError(r.id + ": non-canonical CVE id '" + c + "'");
        }
        for (auto a : kAllAspects) {
            const auto& slot = r.aspects.slot(a);
            for (std::size_t i = 0; i < slot.size(); ++i) {
                if (text::trim(slot[i].text).empty()) throw ContractError(r.id + ": empty aspect value");
                const auto& p = slot[i].provenance;
                if (p.kind == Provenance::Kind::FromPoc && !(p.similarity >= 0.0 && p.similarity <= 1.0)) {
                    throw ContractError(r.id + ": FromPoc similarity outside [0,1]");
                }
                for (std::size_t k = 0; k < i; ++k) {
                    if (text::fold_equal(slot[k].text, slot[i].text)) {
                        throw ContractError(r.id + ": duplicate value in slot " + std::string(to_string(a)));
                    }
                }
            }
        }
    }
}

}  // namespace pocfuse
