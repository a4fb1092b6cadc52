#pragma once

#include "pocfuse/link.hpp"
#include "pocfuse/report.hpp"
#include "pocfuse/similarity.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pocfuse::pipeline {

namespace fs = std::filesystem;

/// Every invalid setting, reported together.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// A stage was invoked before the stage it depends on, or the workspace is busy.
class PrerequisiteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordered key/value pairs from one configuration layer (file, environment, or flags).
using Settings = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; '#' starts a comment line. Relative paths resolve against the file's directory.
Settings parse_config_file(const fs::path& path);
Settings parse_config_text(std::string_view text, const fs::path& base_dir);

/// POCFUSE_WORKSPACE, POCFUSE_EXTRACTOR_URL, POCFUSE_CLASSIFIER_URL.
Settings settings_from_environment();

struct SourceSpec {
    std::string name;
    fs::path path;
};

enum class Stage { Ingest, Classify, Extract, Link, Complete, Stats };

inline constexpr std::array<Stage, 6> kAllStages = {Stage::Ingest, Stage::Classify, Stage::Extract,
                                                    Stage::Link,   Stage::Complete, Stage::Stats};

std::string_view to_string(Stage s);
std::string_view stage_directory(Stage s);

struct PipelineConfig {
    fs::path workspace;
    std::vector<SourceSpec> sources;
    std::optional<fs::path> cve_path;
    std::optional<fs::path> signatures_path;
    double code_threshold = 0.5;
    double text_threshold = 0.95;
    double classifier_cutoff = 0.85;
    std::string extractor_url;
    std::string classifier_url;
    int service_in_flight = 8;
    int service_deadline_ms = 10'000;
    std::uint64_t seed = 42;
    int jobs = 0;  // 0 = all cores, 1 = serial kernels
    ReportFormat format = ReportFormat::Markdown;
    std::set<Aspect> poc_aspects{kAllAspects.begin(), kAllAspects.end()};
    EmbeddingParams embedding;
    std::size_t pair_positives = 600;
    std::size_t pair_negatives = 5400;
    SplitRatio pair_split;

    /// Settings that influence outputs, in a fixed order; excludes paths, workspace, and jobs.
    std::string canonical() const;
};

/// Applies layers in increasing precedence. A layer that names any source replaces the sources
/// of lower layers. Throws ConfigError listing every problem.
PipelineConfig build_config(const std::vector<Settings>& layers);

/// Checks the settings a command needs ("ingest" and "run-all" need sources, every command needs a
/// workspace). Throws ConfigError.
void require_for(const PipelineConfig& config, std::string_view command);

struct StageResult {
    Stage stage;
    std::string summary;
};

/// Runs one stage inside a locked workspace. Throws PrerequisiteError, ConfigError, or DataError.
StageResult run_stage(Stage stage, const PipelineConfig& config);

/// Every stage in order under one lock.
std::vector<StageResult> run_all(const PipelineConfig& config);

/// Writes the labelled pair set to <workspace>/pairs/ from the extracted corpus.
StageResult build_pairs(const PipelineConfig& config);

}  // namespace pocfuse::pipeline
