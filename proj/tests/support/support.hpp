#pragma once

#include "pocfuse/corpus.hpp"

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace pocfuse::testing {

namespace fs = std::filesystem;

fs::path fixture_dir();
fs::path demo_dir();
fs::path cli_path();

/// Line-delimited {id, source, content, cve?, software?} records; each record keeps its own source.
std::vector<PocReport> load_fixture_reports(const fs::path& path);

/// categorize + extract_all with the built-in table, default rules, and the pattern extractor.
PocReport process(PocReport report);
Corpus process_all(std::vector<PocReport> reports);

PocReport make_report(std::string id, ContentKind kind, std::string content = "");
void add_original(PocReport& r, Aspect a, std::initializer_list<std::string_view> values);

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(std::string_view tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

/// Relative path -> file bytes for every regular file below `root`.
std::vector<std::pair<std::string, std::string>> snapshot_tree(const fs::path& root);

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs `args` (argv[0] excluded) through the CLI with stdout/stderr captured.
CommandResult run_cli(const std::vector<std::string>& args, const std::vector<std::string>& env = {});

}  // namespace pocfuse::testing
