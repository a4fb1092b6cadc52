#include "pocfuse/io.hpp"
#include "pocfuse/pipeline.hpp"

#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>

using namespace pocfuse;
using namespace pocfuse::pipeline;
namespace pt = pocfuse::testing;

namespace {

PipelineConfig demo_config(const fs::path& workspace, Settings extra = {}) {
    extra.emplace_back("workspace", workspace.string());
    extra.emplace_back("embedding_epochs", "2");
    return build_config({parse_config_file(pt::demo_dir() / "pocfuse.conf"), extra});
}

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("config text resolves relative paths and skips comments") {
        const auto s = parse_config_text("# comment\n\nworkspace = ws\nsource = a=data/a.jsonl\nseed = 7\n", "/base");
        REQUIRE(s.size() == 3);
        CHECK(s[0] == std::pair<std::string, std::string>{"workspace", "/base/ws"});
        CHECK(s[1] == std::pair<std::string, std::string>{"source", "a=/base/data/a.jsonl"});
        CHECK(s[2] == std::pair<std::string, std::string>{"seed", "7"});
        CHECK(parse_config_text("cve = /abs/cves.jsonl\n", "/base")[0].second == "/abs/cves.jsonl");
        CHECK_THROWS_AS(parse_config_text("no equals sign\n", "/base"), ConfigError);
        CHECK_THROWS_AS(parse_config_file("/nonexistent/pocfuse.conf"), ConfigError);
    }

    TEST_CASE("later layers take precedence") {
        const auto demo = pt::demo_dir();
        const Settings file = {{"seed", "1"}, {"code_threshold", "0.4"}, {"source", "exploitdb=" + (demo / "exploitdb.jsonl").string()}};
        const Settings env = {{"seed", "2"}};
        const Settings flags = {{"seed", "3"}, {"source", "seebug=" + (demo / "seebug.jsonl").string()}};
        const auto c = build_config({file, env, flags});
        CHECK(c.seed == 3);
        CHECK(c.code_threshold == 0.4);
        REQUIRE(c.sources.size() == 1);
        CHECK(c.sources[0].name == "seebug");
        CHECK(build_config({file, env}).seed == 2);
    }

    TEST_CASE("every invalid setting is reported together") {
        try {
            build_config({{{"seed", "abc"}, {"code_threshold", "1.5"}, {"format", "xml"}, {"bogus", "1"}}});
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.problems().size() == 4);
        }
        CHECK_THROWS_AS(build_config({{{"source", "nosuchsource=/x"}}}), ConfigError);
        CHECK_THROWS_AS(build_config({{{"extractor_url", "ftp://x"}}}), ConfigError);
        CHECK_THROWS_AS(build_config({{{"source", "seebug=/nonexistent.jsonl"}}}), ConfigError);
    }

    TEST_CASE("aspect whitelist and pair settings") {
        const auto c = build_config({{{"poc_aspects", "title,author"}, {"pair_split", "7:2:1"}}});
        CHECK(c.poc_aspects == std::set<Aspect>{Aspect::Title, Aspect::Author});
        CHECK(c.pair_split.train == doctest::Approx(0.7));
        CHECK(c.pair_split.dev == doctest::Approx(0.2));
        CHECK(build_config({}).poc_aspects.size() == 8);
    }

    TEST_CASE("environment layer") {
        ::setenv("POCFUSE_WORKSPACE", "/tmp/ws-env", 1);
        ::setenv("POCFUSE_CLASSIFIER_URL", "http://svc:81/c", 1);
        const auto s = settings_from_environment();
        ::unsetenv("POCFUSE_WORKSPACE");
        ::unsetenv("POCFUSE_CLASSIFIER_URL");
        const auto c = build_config({s});
        CHECK(c.workspace == "/tmp/ws-env");
        CHECK(c.classifier_url == "http://svc:81/c");
        CHECK(settings_from_environment().empty());
    }

    TEST_CASE("commands check their required settings") {
        CHECK_THROWS_AS(require_for(build_config({}), "stats"), ConfigError);
        const auto c = build_config({{{"workspace", "/tmp/x"}}});
        CHECK_NOTHROW(require_for(c, "stats"));
        CHECK_THROWS_AS(require_for(c, "ingest"), ConfigError);
        CHECK_THROWS_AS(require_for(c, "run-all"), ConfigError);
    }

    TEST_CASE("canonical form ignores paths and jobs") {
        auto a = build_config({{{"workspace", "/a"}, {"jobs", "1"}}});
        auto b = build_config({{{"workspace", "/b"}, {"jobs", "4"}}});
        CHECK(a.canonical() == b.canonical());
        b.seed = 9;
        CHECK(a.canonical() != b.canonical());
    }

    TEST_CASE("stages enforce their prerequisites") {
        pt::TempDir ws("prereq");
        const auto c = demo_config(ws.path());
        CHECK_THROWS_AS(run_stage(Stage::Classify, c), PrerequisiteError);
        CHECK_THROWS_AS(run_stage(Stage::Stats, c), PrerequisiteError);
        CHECK_THROWS_AS(build_pairs(c), PrerequisiteError);
        run_stage(Stage::Ingest, c);
        CHECK(fs::exists(ws.path() / "01-ingest" / "manifest.json"));
        CHECK_THROWS_AS(run_stage(Stage::Extract, c), PrerequisiteError);
        CHECK_FALSE(fs::exists(ws.path() / ".lock"));
    }

    TEST_CASE("run-all matches the stages run one by one") {
        pt::TempDir a("all"), b("steps");
        run_all(demo_config(a.path()));
        const auto cb = demo_config(b.path());
        for (const auto s : kAllStages) run_stage(s, cb);
        CHECK(pt::snapshot_tree(a.path()) == pt::snapshot_tree(b.path()));

        const auto manifest = nlohmann::json::parse(io::read_file(a.path() / "05-complete" / "manifest.json"));
        CHECK(manifest["stage"] == "complete");
        CHECK(manifest["inputs"].contains("03-extract/corpus.jsonl"));
        CHECK(manifest["outputs"]["records.jsonl"] ==
              io::sha256_hex(io::read_file(a.path() / "05-complete" / "records.jsonl")));
        const auto raw = io::read_file(a.path() / "05-complete" / "manifest.json");
        CHECK(raw.find("time") == std::string::npos);
        CHECK(fs::exists(a.path() / "06-stats" / "report.md"));
    }

    TEST_CASE("rerunning a stage removes downstream output") {
        pt::TempDir ws("rerun");
        const auto c = demo_config(ws.path(), {{"pair_positives", "4"}, {"pair_negatives", "20"}});
        run_all(c);
        build_pairs(c);
        CHECK(fs::exists(ws.path() / "pairs" / "pairs.jsonl"));
        run_stage(Stage::Classify, c);
        CHECK(fs::exists(ws.path() / "02-classify" / "manifest.json"));
        for (const auto* d : {"03-extract", "04-link", "05-complete", "06-stats", "pairs"}) {
            CHECK_FALSE(fs::exists(ws.path() / d));
        }
    }

    TEST_CASE("a locked workspace is refused") {
        pt::TempDir ws("locked");
        const auto c = demo_config(ws.path());
        io::write_file(ws.path() / ".lock", "1\n");
        CHECK_THROWS_AS(run_all(c), PrerequisiteError);
        CHECK(fs::exists(ws.path() / ".lock"));
        CHECK_FALSE(fs::exists(ws.path() / "01-ingest"));
    }

    TEST_CASE("csv stats output") {
        pt::TempDir ws("csv");
        run_all(demo_config(ws.path(), {{"format", "csv"}}));
        const auto d = ws.path() / "06-stats";
        CHECK_FALSE(fs::exists(d / "report.md"));
        const auto def = io::read_file(d / "deficiency.csv");
        CHECK(def.rfind("source,aspect,present,total,rate\r\n", 0) == 0);
        CHECK(fs::exists(d / "completion.csv"));
        CHECK(fs::exists(d / "summary.csv"));
    }

    TEST_CASE("serial and parallel runs produce identical workspaces") {
        pt::TempDir a("serial"), b("parallel");
        run_all(demo_config(a.path(), {{"jobs", "1"}}));
        run_all(demo_config(b.path(), {{"jobs", "4"}}));
        CHECK(pt::snapshot_tree(a.path()) == pt::snapshot_tree(b.path()));
    }
}
