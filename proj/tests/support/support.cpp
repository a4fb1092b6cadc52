#include "support.hpp"

#include "pocfuse/classify.hpp"
#include "pocfuse/extract.hpp"
#include "pocfuse/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

namespace pocfuse::testing {

fs::path fixture_dir() { return POCFUSE_FIXTURE_DIR; }
fs::path demo_dir() { return POCFUSE_DEMO_DIR; }
fs::path cli_path() { return POCFUSE_CLI_PATH; }

std::vector<PocReport> load_fixture_reports(const fs::path& path) {
    std::vector<PocReport> out;
    std::istringstream in(io::read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        PocReport r;
        r.id = j.at("id").get<std::string>();
        r.source = SourceId::parse(j.at("source").get<std::string>());
        r.raw_content = j.at("content").get<std::string>();
        if (j.contains("cve")) r.cve_field = j.at("cve").get<std::vector<std::string>>();
        if (j.contains("software")) r.software = j.at("software").get<std::vector<std::string>>();
        out.push_back(std::move(r));
    }
    return out;
}

PocReport process(PocReport report) {
    static const PatternStructuredExtractor extractor;
    static const RuleSet rules = RuleSet::defaults();
    return extract_all(categorize(std::move(report)), rules, extractor);
}

Corpus process_all(std::vector<PocReport> reports) {
    Corpus c;
    for (auto& r : reports) c.reports.push_back(process(std::move(r)));
    return c;
}

PocReport make_report(std::string id, ContentKind kind, std::string content) {
    PocReport r;
    r.id = std::move(id);
    r.source = SourceId::known(SourceId::Kind::ExploitDB);
    r.content_kind = kind;
    r.raw_content = content.empty() ? "content of " + r.id : std::move(content);
    return r;
}

void add_original(PocReport& r, Aspect a, std::initializer_list<std::string_view> values) {
    for (const auto v : values) r.aspects.add(a, AspectValue::make(v, Provenance::original()));
}

TempDir::TempDir(std::string_view tag) {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("pocfuse-" + std::string(tag) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) +
             "-" + std::to_string(rd() % 100000));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::vector<std::pair<std::string, std::string>> snapshot_tree(const fs::path& root) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        out.emplace_back(fs::relative(e.path(), root).generic_string(), io::read_file(e.path()));
    }
    std::sort(out.begin(), out.end());
    return out;
}


CommandResult run_cli(const std::vector<std::string>& args, const std::vector<std::string>& env) {
    TempDir tmp("cli-io");
    const auto out_path = tmp.path() / "out";
    const auto err_path = tmp.path() / "err";
    const pid_t pid = ::fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
        if (!std::freopen(out_path.c_str(), "w", stdout) || !std::freopen(err_path.c_str(), "w", stderr)) _exit(127);
        ::unsetenv("POCFUSE_WORKSPACE");
        ::unsetenv("POCFUSE_EXTRACTOR_URL");
        ::unsetenv("POCFUSE_CLASSIFIER_URL");
        for (const auto& kv : env) {
            const auto eq = kv.find('=');
            ::setenv(kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str(), 1);
        }
        const auto exe = cli_path().string();
        std::vector<char*> argv{const_cast<char*>(exe.c_str())};
        for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        ::execv(exe.c_str(), argv.data());
        _exit(127);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    CommandResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = io::read_file(out_path);
    r.err = io::read_file(err_path);
    return r;
}

}  // namespace pocfuse::testing
