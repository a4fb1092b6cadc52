#include "pocfuse/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace pocfuse;
using namespace pocfuse::pipeline;

enum ExitCode { kOk = 0, kConfigError = 2, kPrerequisiteError = 3, kDataError = 4 };

int fail(ExitCode code, std::string_view kind, std::string_view command, const std::vector<std::string>& errors) {
    nlohmann::ordered_json j;
    j["status"] = "error";
    j["exit_code"] = static_cast<int>(code);
    j["kind"] = kind;
    j["command"] = command;
    j["errors"] = errors;
    std::cerr << j.dump() << "\n";
    return code;
}

struct Flags {
    std::string config;
    std::optional<std::string> workspace, cve, code_threshold, text_threshold, seed, extractor_url,
        classifier_url, jobs, format, positives, negatives, split;
    std::vector<std::string> sources;

    Settings to_settings() const {
        Settings s;
        const std::pair<const char*, const std::optional<std::string>*> scalars[] = {
            {"workspace", &workspace},
            {"cve", &cve},
            {"code_threshold", &code_threshold},
            {"text_threshold", &text_threshold},
            {"seed", &seed},
            {"extractor_url", &extractor_url},
            {"classifier_url", &classifier_url},
            {"jobs", &jobs},
            {"format", &format},
            {"pair_positives", &positives},
            {"pair_negatives", &negatives},
            {"pair_split", &split}};
        for (const auto& [key, value] : scalars) {
            if (*value) s.emplace_back(key, **value);
        }
        for (const auto& src : sources) s.emplace_back("source", src);
        return s;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pocfuse: find and fill missing aspects in PoC reports"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config, "key = value configuration file");
    app.add_option("--workspace", f.workspace, "workspace directory (env POCFUSE_WORKSPACE)");
    app.add_option("--source", f.sources, "report file for a source, as name=path (repeatable)");
    app.add_option("--cve", f.cve, "CVE entry file");
    app.add_option("--code-threshold", f.code_threshold, "similarity threshold for code pairs");
    app.add_option("--text-threshold", f.text_threshold, "similarity threshold for text pairs");
    app.add_option("--seed", f.seed, "random seed");
    app.add_option("--extractor-url", f.extractor_url, "structured extractor service (env POCFUSE_EXTRACTOR_URL)");
    app.add_option("--classifier-url", f.classifier_url, "pair classifier service (env POCFUSE_CLASSIFIER_URL)");
    app.add_option("--jobs", f.jobs, "worker threads (1 = serial kernels, 0 = all cores)");
    app.add_option("--format", f.format, "stats output: markdown or csv");

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"ingest", "read source report files and the CVE file"},
        {"classify", "tag each report as code (with language) or text"},
        {"extract", "extract the eight aspects and CVE ids"},
        {"link", "link related reports"},
        {"complete", "fill missing aspects from CVE entries and linked reports"},
        {"stats", "write deficiency and completion tables"},
        {"run-all", "run every stage in order"},
        {"build-pairs", "write a labelled report-pair set for classifier training"},
    };
    std::string chosen;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        if (name == "build-pairs") {
            sub->add_option("--positives", f.positives, "positive pairs (default 600)");
            sub->add_option("--negatives", f.negatives, "negative pairs (default 5400)");
            sub->add_option("--split", f.split, "train:dev:test ratio (default 8:1:1)");
        }
        sub->callback([&chosen, n = name] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(kConfigError, "config", "", {e.what()});
    }

    try {
        std::vector<Settings> layers;
        if (!f.config.empty()) layers.push_back(parse_config_file(f.config));
        layers.push_back(settings_from_environment());
        layers.push_back(f.to_settings());
        const auto config = build_config(layers);

        std::vector<StageResult> results;
        if (chosen == "run-all") {
            results = run_all(config);
        } else if (chosen == "build-pairs") {
            results.push_back(build_pairs(config));
            std::cout << "build-pairs: " << results.back().summary << "\n";
            return kOk;
        } else {
            for (const auto s : kAllStages) {
                if (to_string(s) == chosen) results.push_back(run_stage(s, config));
            }
        }
        for (const auto& r : results) std::cout << to_string(r.stage) << ": " << r.summary << "\n";
        return kOk;
    } catch (const ConfigError& e) {
        return fail(kConfigError, "config", chosen, e.problems());
    } catch (const PrerequisiteError& e) {
        return fail(kPrerequisiteError, "prerequisite", chosen, {e.what()});
    } catch (const DataError& e) {
        return fail(kDataError, "data", chosen, {e.what()});
    } catch (const std::exception& e) {
        return fail(kDataError, "data", chosen, {e.what()});
    }
}
