#include "pocfuse/pipeline.hpp"

#include "pocfuse/classify.hpp"
#include "pocfuse/complete.hpp"
#include "pocfuse/extract.hpp"
#include "pocfuse/io.hpp"
#include "pocfuse/kernels.hpp"
#include "pocfuse/services.hpp"
#include "pocfuse/text.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <sstream>

namespace pocfuse::pipeline {

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration: " + join(problems, "; ")), problems_(std::move(problems)) {}

// ---------------------------------------------------------------------------
// Settings

namespace {

bool is_path_key(std::string_view key) { return key == "workspace" || key == "cve" || key == "signatures"; }

std::string resolve(const fs::path& base, std::string_view value) {
    fs::path p{std::string(value)};
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.lexically_normal().string();
}

}  // namespace

Settings parse_config_text(std::string_view data, const fs::path& base_dir) {
    Settings out;
    std::vector<std::string> problems;
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(data)) {
        ++line_no;
        const auto t = text::trim(line.text);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back("config line " + std::to_string(line_no) + ": expected key = value");
            continue;
        }
        const auto key = std::string(text::trim(t.substr(0, eq)));
        auto value = std::string(text::trim(t.substr(eq + 1)));
        if (key.empty()) {
            problems.push_back("config line " + std::to_string(line_no) + ": empty key");
            continue;
        }
        if (is_path_key(key)) {
            value = resolve(base_dir, value);
        } else if (key == "source") {
            const auto sep = value.find('=');
            if (sep != std::string::npos) {
                value = std::string(text::trim(value.substr(0, sep))) + "=" +
                        resolve(base_dir, text::trim(std::string_view(value).substr(sep + 1)));
            }
        }
        out.emplace_back(key, value);
    }
    if (!problems.empty()) throw ConfigError(problems);
    return out;
}

Settings parse_config_file(const fs::path& path) {
    std::string data;
    try {
        data = io::read_file(path);
    } catch (const DataError&) {
        throw ConfigError({"cannot read config file '" + path.string() + "'"});
    }
    return parse_config_text(data, path.parent_path());
}

Settings settings_from_environment() {
    Settings out;
    const std::pair<const char*, const char*> vars[] = {{"POCFUSE_WORKSPACE", "workspace"},
                                                       {"POCFUSE_EXTRACTOR_URL", "extractor_url"},
                                                       {"POCFUSE_CLASSIFIER_URL", "classifier_url"}};
    for (const auto& [env, key] : vars) {
        if (const char* v = std::getenv(env); v && *v) out.emplace_back(key, v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::Ingest: return "ingest";
        case Stage::Classify: return "classify";
        case Stage::Extract: return "extract";
        case Stage::Link: return "link";
        case Stage::Complete: return "complete";
        case Stage::Stats: return "stats";
    }
    return "?";
}

std::string_view stage_directory(Stage s) {
    switch (s) {
        case Stage::Ingest: return "01-ingest";
        case Stage::Classify: return "02-classify";
        case Stage::Extract: return "03-extract";
        case Stage::Link: return "04-link";
        case Stage::Complete: return "05-complete";
        case Stage::Stats: return "06-stats";
    }
    return "?";
}

namespace {

class Parser {
public:
    std::vector<std::string> problems;

    template <typename T>
    void integer(const std::string& key, const std::string& v, T& out, T lo, T hi) {
        T parsed{};
        const auto res = std::from_chars(v.data(), v.data() + v.size(), parsed);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
            problems.push_back(key + ": '" + v + "' is not an integer");
        } else if (parsed < lo || parsed > hi) {
            problems.push_back(key + ": " + v + " is out of range");
        } else {
            out = parsed;
        }
    }

    void real(const std::string& key, const std::string& v, double& out, double lo, double hi) {
        double parsed = 0.0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), parsed);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
            problems.push_back(key + ": '" + v + "' is not a number");
        } else if (!(parsed >= lo && parsed <= hi)) {
            problems.push_back(key + ": " + v + " must lie in [" + fmt(lo) + ", " + fmt(hi) + "]");
        } else {
            out = parsed;
        }
    }

    static std::string fmt(double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    }
};

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

PipelineConfig build_config(const std::vector<Settings>& layers) {
    PipelineConfig cfg;
    Parser p;
    for (const auto& layer : layers) {
        bool sources_reset = false;
        for (const auto& [key, v] : layer) {
            if (key == "workspace") {
                if (v.empty()) p.problems.push_back("workspace: empty path");
                cfg.workspace = v;
            } else if (key == "source") {
                if (!sources_reset) {
                    cfg.sources.clear();
                    sources_reset = true;
                }
                const auto eq = v.find('=');
                if (eq == std::string::npos || eq == 0 || eq + 1 == v.size()) {
                    p.problems.push_back("source: '" + v + "' must look like name=path");
                    continue;
                }
                cfg.sources.push_back({std::string(text::trim(v.substr(0, eq))), fs::path(v.substr(eq + 1))});
            } else if (key == "cve") {
                cfg.cve_path = v;
            } else if (key == "signatures") {
                cfg.signatures_path = v;
            } else if (key == "code_threshold") {
                p.real(key, v, cfg.code_threshold, 0.0, 1.0);
            } else if (key == "text_threshold") {
                p.real(key, v, cfg.text_threshold, 0.0, 1.0);
            } else if (key == "classifier_cutoff") {
                p.real(key, v, cfg.classifier_cutoff, 0.0, 1.0);
            } else if (key == "extractor_url") {
                cfg.extractor_url = v;
            } else if (key == "classifier_url") {
                cfg.classifier_url = v;
            } else if (key == "service_in_flight") {
                p.integer(key, v, cfg.service_in_flight, 1, 1024);
            } else if (key == "service_deadline_ms") {
                p.integer(key, v, cfg.service_deadline_ms, 1, 3'600'000);
            } else if (key == "seed") {
                p.integer<std::uint64_t>(key, v, cfg.seed, 0, UINT64_MAX);
            } else if (key == "jobs") {
                p.integer(key, v, cfg.jobs, 0, 4096);
            } else if (key == "format") {
                try {
                    cfg.format = parse_report_format(v);
                } catch (const ContractError& e) {
                    p.problems.push_back(std::string("format: ") + e.what());
                }
            } else if (key == "poc_aspects") {
                cfg.poc_aspects.clear();
                if (text::fold(v) == "all") {
                    cfg.poc_aspects.insert(kAllAspects.begin(), kAllAspects.end());
                    continue;
                }
                std::string_view rest = v;
                while (!rest.empty()) {
                    const auto comma = rest.find(',');
                    const auto name = text::trim(rest.substr(0, comma));
                    if (!name.empty()) {
                        if (const auto a = parse_aspect(text::fold(name))) {
                            cfg.poc_aspects.insert(*a);
                        } else {
                            p.problems.push_back("poc_aspects: unknown aspect '" + std::string(name) + "'");
                        }
                    }
                    if (comma == std::string_view::npos) break;
                    rest = rest.substr(comma + 1);
                }
            } else if (key == "embedding_dim") {
                p.integer(key, v, cfg.embedding.dim, 1, 4096);
            } else if (key == "embedding_window") {
                p.integer(key, v, cfg.embedding.window, 1, 100);
            } else if (key == "embedding_negatives") {
                p.integer(key, v, cfg.embedding.negative_samples, 0, 100);
            } else if (key == "embedding_epochs") {
                p.integer(key, v, cfg.embedding.epochs, 1, 1000);
            } else if (key == "embedding_learning_rate") {
                p.real(key, v, cfg.embedding.learning_rate, 1e-9, 10.0);
            } else if (key == "embedding_min_count") {
                p.integer(key, v, cfg.embedding.min_count, 1, 1'000'000);
            } else if (key == "pair_positives") {
                p.integer<std::size_t>(key, v, cfg.pair_positives, 0, 100'000'000);
            } else if (key == "pair_negatives") {
                p.integer<std::size_t>(key, v, cfg.pair_negatives, 0, 100'000'000);
            } else if (key == "pair_split") {
                try {
                    cfg.pair_split = SplitRatio::parse(v);
                } catch (const ContractError& e) {
                    p.problems.push_back(std::string("pair_split: ") + e.what());
                }
            } else {
                p.problems.push_back("unknown setting '" + key + "'");
            }
        }
    }
    cfg.embedding.seed = cfg.seed;

    std::set<std::string> names;
    for (const auto& s : cfg.sources) {
        if (!names.insert(text::fold(s.name)).second) p.problems.push_back("source: duplicate name '" + s.name + "'");
        if (!fs::is_regular_file(s.path)) {
            p.problems.push_back("source " + s.name + ": no such file '" + s.path.string() + "'");
        }
    }
    if (cfg.cve_path && !fs::is_regular_file(*cfg.cve_path)) {
        p.problems.push_back("cve: no such file '" + cfg.cve_path->string() + "'");
    }
    if (cfg.signatures_path && !fs::is_regular_file(*cfg.signatures_path)) {
        p.problems.push_back("signatures: no such file '" + cfg.signatures_path->string() + "'");
    }
    for (const auto& [key, url] : {std::pair{"extractor_url", &cfg.extractor_url},
                                   std::pair{"classifier_url", &cfg.classifier_url}}) {
        if (url->empty()) continue;
        try {
            Endpoint::parse(*url);
        } catch (const ContractError& e) {
            p.problems.push_back(std::string(key) + ": " + e.what());
        }
    }
    if (!cfg.workspace.empty() && fs::exists(cfg.workspace) && !fs::is_directory(cfg.workspace)) {
        p.problems.push_back("workspace: '" + cfg.workspace.string() + "' is not a directory");
    }
    if (!p.problems.empty()) throw ConfigError(p.problems);
    return cfg;
}

void require_for(const PipelineConfig& config, std::string_view command) {
    std::vector<std::string> problems;
    if (config.workspace.empty()) problems.push_back("workspace: not set (use --workspace or POCFUSE_WORKSPACE)");
    if ((command == "ingest" || command == "run-all") && config.sources.empty()) {
        problems.push_back("source: at least one --source name=path is required");
    }
    if (!problems.empty()) throw ConfigError(problems);
}

std::string PipelineConfig::canonical() const {
    std::string out;
    const auto put = [&](std::string_view k, const std::string& v) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    };
    std::vector<std::string> source_names;
    for (const auto& s : sources) source_names.push_back(s.name);
    put("sources", join(source_names, ","));
    put("cve", cve_path ? "yes" : "no");
    put("signatures", signatures_path ? "custom" : "builtin");
    put("code_threshold", format_double(code_threshold));
    put("text_threshold", format_double(text_threshold));
    put("classifier_cutoff", format_double(classifier_cutoff));
    put("extractor_url", extractor_url);
    put("classifier_url", classifier_url);
    put("seed", std::to_string(seed));
    put("format", format == ReportFormat::Csv ? "csv" : "markdown");
    std::vector<std::string> aspects;
    for (const auto a : poc_aspects) aspects.emplace_back(to_string(a));
    put("poc_aspects", join(aspects, ","));
    put("embedding", std::to_string(embedding.dim) + "," + std::to_string(embedding.window) + "," +
                         std::to_string(embedding.negative_samples) + "," + std::to_string(embedding.epochs) + "," +
                         format_double(embedding.learning_rate) + "," + std::to_string(embedding.min_count));
    put("pairs", std::to_string(pair_positives) + "," + std::to_string(pair_negatives) + "," +
                     format_double(pair_split.train) + ":" + format_double(pair_split.dev) + ":" +
                     format_double(pair_split.test));
    return out;
}

// ---------------------------------------------------------------------------
// Workspace

namespace {

class WorkspaceLock {
public:
    explicit WorkspaceLock(const fs::path& workspace) : path_(workspace / ".lock") {
        std::error_code ec;
        fs::create_directories(workspace, ec);
        if (ec) throw DataError("cannot create workspace '" + workspace.string() + "': " + ec.message());
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            if (errno == EEXIST) {
                throw PrerequisiteError("workspace '" + workspace.string() +
                                        "' is locked by another run (remove .lock if no run is active)");
            }
            throw DataError("cannot create lock file: " + std::string(std::strerror(errno)));
        }
        const auto pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto n = ::write(fd_, pid.data(), pid.size());
    }
    ~WorkspaceLock() {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

using Json = nlohmann::ordered_json;

struct StageOutput {
    std::map<std::string, std::string> files;  // name -> content
    Json stats = Json::object();
    std::string summary;
};

class Runner {
public:
    explicit Runner(const PipelineConfig& cfg) : cfg_(cfg), config_hash_(io::sha256_hex(cfg.canonical())) {
        if (cfg_.jobs != 1) kernels::omp::set_max_threads(cfg_.jobs);
    }

    StageResult run(Stage s) {
        StageOutput out;
        switch (s) {
            case Stage::Ingest: out = ingest(); break;
            case Stage::Classify: out = classify(); break;
            case Stage::Extract: out = extract(); break;
            case Stage::Link: out = link(); break;
            case Stage::Complete: out = complete(); break;
            case Stage::Stats: out = stats(); break;
        }
        commit(stage_directory(s), std::string(to_string(s)), out, s);
        return {s, out.summary};
    }

    StageResult pairs() {
        require(Stage::Extract, "build-pairs");
        const auto corpus = deserialize_corpus(input(Stage::Extract, "corpus.jsonl"));
        const auto ds = build_pair_training_set(corpus, cfg_.pair_positives, cfg_.pair_negatives, cfg_.pair_split,
                                                cfg_.seed);
        StageOutput out;
        out.files["pairs.jsonl"] = serialize_pair_dataset(ds);
        out.stats["train"] = ds.train.size();
        out.stats["dev"] = ds.dev.size();
        out.stats["test"] = ds.test.size();
        out.summary = std::to_string(ds.train.size()) + "/" + std::to_string(ds.dev.size()) + "/" +
                      std::to_string(ds.test.size()) + " train/dev/test pairs";
        commit("pairs", "build-pairs", out, std::nullopt);
        return {Stage::Extract, out.summary};
    }

private:
    bool parallel() const { return cfg_.jobs != 1; }

    fs::path dir(std::string_view name) const { return cfg_.workspace / std::string(name); }

    void require(Stage needed, std::string_view by) const {
        if (!fs::exists(dir(stage_directory(needed)) / "manifest.json")) {
            throw PrerequisiteError("'" + std::string(by) + "' needs the output of '" + std::string(to_string(needed)) +
                                    "'; run `pocfuse " + std::string(to_string(needed)) + "` first");
        }
    }

    std::string input(Stage s, const std::string& file) {
        const auto rel = std::string(stage_directory(s)) + "/" + file;
        auto data = io::read_file(cfg_.workspace / rel);
        inputs_[rel] = io::sha256_hex(data);
        return data;
    }

    std::string external(const std::string& label, const fs::path& path) {
        auto data = io::read_file(path);
        inputs_[label] = io::sha256_hex(data);
        return data;
    }

    void commit(std::string_view dirname, const std::string& stage_name, const StageOutput& out,
                std::optional<Stage> stage) {
        // A rerun invalidates everything downstream of it.
        if (stage) {
            for (const auto later : kAllStages) {
                if (later > *stage) fs::remove_all(dir(stage_directory(later)));
            }
            if (*stage <= Stage::Extract) fs::remove_all(dir("pairs"));
        }
        const auto d = dir(dirname);
        fs::remove_all(d);
        fs::create_directories(d);
        Json manifest;
        manifest["format"] = "pocfuse-manifest";
        manifest["version"] = 1;
        manifest["stage"] = stage_name;
        manifest["config_hash"] = config_hash_;
        manifest["seed"] = cfg_.seed;
        manifest["inputs"] = Json::object();
        for (const auto& [k, v] : inputs_) manifest["inputs"][k] = v;
        manifest["outputs"] = Json::object();
        for (const auto& [name, content] : out.files) {
            io::write_file(d / name, content);
            manifest["outputs"][name] = io::sha256_hex(content);
        }
        manifest["stats"] = out.stats;
        io::write_file(d / "manifest.json", manifest.dump(2) + "\n");
        inputs_.clear();
    }

    StageOutput ingest() {
        Corpus corpus;
        std::unordered_set<std::string> seen;
        Json warnings_out = Json::array();
        std::string warnings;
        std::size_t skipped = 0;
        for (const auto& s : cfg_.sources) {
            external("source:" + s.name, s.path);
            auto res = ingest_reports(s.path, SourceId::parse(s.name), &seen);
            skipped += res.skipped;
            for (const auto& w : res.warnings) {
                Json j;
                j["file"] = "source:" + s.name;
                j["line"] = w.line;
                j["message"] = w.message;
                warnings += j.dump() + "\n";
            }
            for (auto& r : res.reports) corpus.reports.push_back(std::move(r));
        }
        CveDb cves;
        if (cfg_.cve_path) {
            external("cve", *cfg_.cve_path);
            auto res = ingest_cve_entries(*cfg_.cve_path);
            for (const auto& w : res.warnings) {
                Json j;
                j["file"] = "cve";
                j["line"] = w.line;
                j["message"] = w.message;
                warnings += j.dump() + "\n";
            }
            cves = std::move(res.entries);
        }
        StageOutput out;
        out.files["corpus.jsonl"] = serialize_corpus(corpus);
        out.files["cves.jsonl"] = serialize_cve_db(cves);
        out.files["warnings.jsonl"] = warnings;
        out.stats["reports"] = corpus.reports.size();
        out.stats["skipped"] = skipped;
        out.stats["cve_entries"] = cves.size();
        out.summary = std::to_string(corpus.reports.size()) + " reports, " + std::to_string(cves.size()) +
                      " CVE entries, " + std::to_string(skipped) + " skipped";
        return out;
    }

    StageOutput classify() {
        require(Stage::Ingest, "classify");
        auto corpus = deserialize_corpus(input(Stage::Ingest, "corpus.jsonl"));
        std::optional<SignatureTable> custom;
        if (cfg_.signatures_path) custom = SignatureTable::parse(external("signatures", *cfg_.signatures_path));
        const auto& table = custom ? *custom : SignatureTable::builtin();
        if (parallel()) {
            kernels::omp::categorize_all(corpus.reports, table);
        } else {
            kernels::serial::categorize_all(corpus.reports, table);
        }
        std::map<std::string, std::size_t> kinds;
        for (const auto& r : corpus.reports) {
            kinds[r.content_kind.is_code() ? "code:" + std::string(to_string(r.content_kind.lang)) : "text"]++;
        }
        StageOutput out;
        out.files["corpus.jsonl"] = serialize_corpus(corpus);
        out.stats["kinds"] = Json::object();
        std::size_t code = 0;
        for (const auto& [k, n] : kinds) {
            out.stats["kinds"][k] = n;
            if (k != "text") code += n;
        }
        out.summary = std::to_string(code) + " code, " + std::to_string(corpus.reports.size() - code) + " text";
        return out;
    }

    StageOutput extract() {
        require(Stage::Classify, "extract");
        auto corpus = deserialize_corpus(input(Stage::Classify, "corpus.jsonl"));
        const auto rules = RuleSet::defaults();
        std::unique_ptr<StructuredExtractor> extractor;
        if (cfg_.extractor_url.empty()) {
            extractor = std::make_unique<PatternStructuredExtractor>();
        } else {
            extractor = std::make_unique<HttpStructuredExtractor>(cfg_.extractor_url, service_options());
        }
        Degradation degradation;
        if (parallel()) {
            kernels::omp::extract_all(corpus.reports, rules, *extractor, &degradation);
        } else {
            kernels::serial::extract_all(corpus.reports, rules, *extractor, &degradation);
        }
        std::size_t values = 0;
        for (const auto& r : corpus.reports) {
            for (const auto a : kAllAspects) values += r.aspects.slot(a).size();
        }
        StageOutput out;
        out.files["corpus.jsonl"] = serialize_corpus(corpus);
        out.stats["extractor"] = extractor->name();
        out.stats["extractor_fallbacks"] = degradation.fallbacks.load();
        out.stats["aspect_values"] = values;
        out.summary = std::to_string(values) + " aspect values";
        if (degradation.fallbacks.load() > 0) {
            out.summary += ", " + std::to_string(degradation.fallbacks.load()) + " extractor fallbacks";
        }
        return out;
    }

    ServiceOptions service_options() const {
        ServiceOptions o;
        o.deadline = std::chrono::milliseconds(cfg_.service_deadline_ms);
        o.max_in_flight = cfg_.service_in_flight;
        return o;
    }

    static bool has_text_pairs(const Corpus& corpus) {
        std::map<std::string, std::size_t> text_per_cve;
        for (const auto& r : corpus.reports) {
            if (!r.content_kind.is_text()) continue;
            for (const auto& c : r.cve_ids) {
                if (++text_per_cve[c] >= 2) return true;
            }
        }
        return false;
    }

    StageOutput link() {
        require(Stage::Extract, "link");
        const auto corpus = deserialize_corpus(input(Stage::Extract, "corpus.jsonl"));
        StageOutput out;
        std::optional<EmbeddingModel> model;
        const auto texts = embedding_training_texts(corpus);
        if (!texts.empty()) {
            try {
                model = train_embeddings(texts, cfg_.embedding);
            } catch (const DataError&) {
                if (has_text_pairs(corpus)) {
                    throw DataError("text reports share CVEs but no word reaches embedding_min_count=" +
                                    std::to_string(cfg_.embedding.min_count));
                }
            }
        }
        if (model) out.files["embeddings.txt"] = serialize_embeddings(*model);

        const HeuristicPairClassifier heuristic({cfg_.classifier_cutoff, 0.5, 0.5});
        std::unique_ptr<HttpPairClassifier> remote;
        if (!cfg_.classifier_url.empty()) {
            remote = std::make_unique<HttpPairClassifier>(cfg_.classifier_url, service_options());
        }
        const PairClassifier& classifier = remote ? static_cast<const PairClassifier&>(*remote) : heuristic;

        LinkConfig lc{cfg_.code_threshold, cfg_.text_threshold, parallel()};
        LinkStats ls;
        const auto links = build_link_graph(corpus, ScoringModels{model ? &*model : nullptr}, classifier, lc, &ls,
                                            remote ? &heuristic : nullptr);
        std::size_t shared = 0;
        for (const auto& l : links) shared += l.basis.kind == LinkBasis::Kind::SharedCve ? 1 : 0;
        out.files["links.jsonl"] = serialize_links(links);
        out.stats["links"] = links.size();
        out.stats["shared_cve_links"] = shared;
        out.stats["classifier_links"] = links.size() - shared;
        out.stats["same_cve_candidates"] = ls.same_cve_candidates;
        out.stats["classifier_candidates"] = ls.classifier_candidates;
        out.stats["degenerate_scores"] = ls.degenerate_scores;
        out.stats["classifier"] = classifier.name();
        out.stats["classifier_fallbacks"] = ls.classifier_fallbacks;
        out.stats["embedding_vocabulary"] = model ? model->size() : 0;
        out.summary = std::to_string(links.size()) + " links (" + std::to_string(shared) + " shared CVE, " +
                      std::to_string(links.size() - shared) + " classifier)";
        return out;
    }

    StageOutput complete() {
        require(Stage::Extract, "complete");
        require(Stage::Link, "complete");
        const auto corpus = deserialize_corpus(input(Stage::Extract, "corpus.jsonl"));
        const auto cves = deserialize_cve_db(input(Stage::Ingest, "cves.jsonl"));
        const auto links = deserialize_links(input(Stage::Link, "links.jsonl"));

        std::string id_material = config_hash_;
        for (const auto& [k, v] : inputs_) id_material += k + v;
        CompletionConfig cc;
        cc.code_threshold = cfg_.code_threshold;
        cc.text_threshold = cfg_.text_threshold;
        cc.poc_aspect_whitelist = cfg_.poc_aspects;
        cc.run_id = "run-" + io::sha256_hex(id_material).substr(0, 12);
        cc.parallel = parallel();
        const auto result = run_completion(corpus, cves, links, cc);

        std::size_t from_cve = 0;
        for (const auto& r : result.records) from_cve += r.origin.kind == CompletionOrigin::Kind::FromCve ? 1 : 0;
        StageOutput out;
        out.files["corpus.jsonl"] = serialize_corpus(result.corpus);
        out.files["records.jsonl"] = serialize_records(result.records);
        out.stats["run_id"] = cc.run_id;
        out.stats["records"] = result.records.size();
        out.stats["from_cve"] = from_cve;
        out.stats["from_poc"] = result.records.size() - from_cve;
        out.summary = std::to_string(result.records.size()) + " values completed (" + std::to_string(from_cve) +
                      " from CVE entries, " + std::to_string(result.records.size() - from_cve) + " from PoCs)";
        return out;
    }

    StageOutput stats() {
        require(Stage::Complete, "stats");
        const auto corpus = deserialize_corpus(input(Stage::Complete, "corpus.jsonl"));
        const auto records = deserialize_records(input(Stage::Complete, "records.jsonl"));
        const auto def = deficiency_stats(corpus);
        const auto comp = completion_stats(records, corpus);
        const std::vector<Table> tables = {deficiency_table(def), completion_table(comp), summary_table(comp)};
        StageOutput out;
        if (cfg_.format == ReportFormat::Markdown) {
            out.files["report.md"] = "# Corpus report\n\n" + render_report(tables, ReportFormat::Markdown);
        } else {
            out.files["deficiency.csv"] = render_table(tables[0], ReportFormat::Csv);
            out.files["completion.csv"] = render_table(tables[1], ReportFormat::Csv);
            out.files["summary.csv"] = render_table(tables[2], ReportFormat::Csv);
        }
        out.stats["mean_presence"] = def.overall.mean_rate;
        out.summary = "mean aspect presence " + format_rate(def.overall.mean_rate);
        return out;
    }

    const PipelineConfig& cfg_;
    std::string config_hash_;
    std::map<std::string, std::string> inputs_;
};

}  // namespace

StageResult run_stage(Stage stage, const PipelineConfig& config) {
    require_for(config, to_string(stage));
    WorkspaceLock lock(config.workspace);
    Runner runner(config);
    return runner.run(stage);
}

std::vector<StageResult> run_all(const PipelineConfig& config) {
    require_for(config, "run-all");
    WorkspaceLock lock(config.workspace);
    Runner runner(config);
    std::vector<StageResult> out;
    for (const auto s : kAllStages) out.push_back(runner.run(s));
    return out;
}

StageResult build_pairs(const PipelineConfig& config) {
    require_for(config, "build-pairs");
    WorkspaceLock lock(config.workspace);
    Runner runner(config);
    return runner.pairs();
}

}  // namespace pocfuse::pipeline
