#include "pocfuse/complete.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace pocfuse;
namespace pt = pocfuse::testing;

namespace {

CveEntry slmail() { return {"CVE-2003-0264", {{"SLMail", {"5.1", "5.5"}}}, {"Windows 2000"}}; }

PocReport tagged(const std::string& id, std::vector<std::string> software = {}) {
    auto r = pt::make_report(id, ContentKind::code(LanguageId::Python));
    r.cve_ids = {"CVE-2003-0264"};
    r.software = std::move(software);
    return r;
}

std::vector<std::string> texts(const PocReport& r, Aspect a) {
    std::vector<std::string> out;
    for (const auto& v : r.aspects.slot(a)) out.push_back(v.text);
    return out;
}

PocLink code_link(const std::string& a, const std::string& b, double sim) {
    return {a, b, LinkBasis::shared_cve("CVE-2003-0264"), sim, PairKind::code(LanguageId::Python)};
}

}  // namespace

TEST_SUITE("complete") {
    TEST_CASE("verify_association") {
        CHECK(verify_association(tagged("a", {"SLMail"}), slmail()));
        CveEntry tomcat{"CVE-2003-0264", {{"tomcat", {}}}, {}};
        CHECK(verify_association(tagged("a", {"Apache Tomcat"}), tomcat));
        CveEntry httpd{"CVE-2003-0264", {{"httpd", {}}}, {}};
        CHECK_FALSE(verify_association(tagged("a", {"nginx"}), httpd));
        CHECK(verify_association(tagged("a"), httpd));
    }

    TEST_CASE("complete_from_cve: direct completion and append-missing") {
        auto [full, recs] = complete_from_cve(tagged("a", {"SLMail"}), slmail());
        CHECK(texts(full, Aspect::SoftwareVersion) == std::vector<std::string>{"5.1", "5.5"});
        CHECK(texts(full, Aspect::TestPlatform) == std::vector<std::string>{"Windows 2000"});
        CHECK(recs.size() == 3);
        for (const auto& v : full.aspects.slot(Aspect::SoftwareVersion)) {
            CHECK(v.provenance == Provenance::from_cve("CVE-2003-0264"));
        }

        auto partial = tagged("b", {"SLMail"});
        pt::add_original(partial, Aspect::SoftwareVersion, {"5.5 "});
        auto [p, precs] = complete_from_cve(partial, slmail());
        CHECK(texts(p, Aspect::SoftwareVersion) == std::vector<std::string>{"5.5", "5.1"});
        REQUIRE(precs.size() == 2);
        CHECK(precs[0].slot == Aspect::SoftwareVersion);
        CHECK(precs[0].value == "5.1");
        CHECK(precs[0].origin.cve_id == "CVE-2003-0264");
    }

    TEST_CASE("complete_from_cve: no platforms, basic slots untouched") {
        CveEntry e{"CVE-2003-0264", {{"SLMail", {"5.5"}}}, {}};
        auto [r, recs] = complete_from_cve(tagged("a"), e);
        CHECK(r.aspects.empty(Aspect::TestPlatform));
        CHECK(recs.size() == 1);
        for (const auto a : {Aspect::Title, Aspect::Author, Aspect::PublishTime, Aspect::Reference}) {
            CHECK(r.aspects.empty(a));
        }
    }

    TEST_CASE("complete_from_cve preconditions") {
        auto other = tagged("a", {"nginx"});
        CHECK_THROWS_AS(complete_from_cve(other, slmail()), ContractError);
        auto untagged = tagged("b");
        untagged.cve_ids.clear();
        CHECK_THROWS_AS(complete_from_cve(untagged, slmail()), ContractError);
    }

    TEST_CASE("complete_from_poc fills gaps with original donor values only") {
        auto target = tagged("t");
        pt::add_original(target, Aspect::Author, {"keep me"});
        auto donor = tagged("d");
        pt::add_original(donor, Aspect::TriggerStep, {"1. run\n2. crash"});
        pt::add_original(donor, Aspect::Author, {"donor author"});
        donor.aspects.add(Aspect::TestPlatform, AspectValue::make("Linux", Provenance::from_cve("CVE-2003-0264")));
        const CompletionConfig cfg;
        auto [out, recs] = complete_from_poc(target, donor, code_link("d", "t", 0.8), cfg);
        CHECK(texts(out, Aspect::TriggerStep) == std::vector<std::string>{"1. run\n2. crash"});
        CHECK(out.aspects.slot(Aspect::TriggerStep)[0].provenance == Provenance::from_poc("d", 0.8));
        CHECK(texts(out, Aspect::Author) == std::vector<std::string>{"keep me"});
        CHECK(out.aspects.empty(Aspect::TestPlatform));
        REQUIRE(recs.size() == 1);
        CHECK(recs[0].origin.kind == CompletionOrigin::Kind::FromPoc);
        CHECK(recs[0].origin.donor == "d");
        CHECK(recs[0].origin.basis == LinkBasis::shared_cve("CVE-2003-0264"));
    }

    TEST_CASE("complete_from_poc respects the whitelist and thresholds") {
        auto target = tagged("t");
        auto donor = tagged("d");
        pt::add_original(donor, Aspect::Title, {"T"});
        pt::add_original(donor, Aspect::Author, {"A"});
        CompletionConfig cfg;
        cfg.poc_aspect_whitelist = {Aspect::Author};
        auto [out, recs] = complete_from_poc(target, donor, code_link("d", "t", 0.8), cfg);
        CHECK(out.aspects.empty(Aspect::Title));
        CHECK(recs.size() == 1);
        CHECK_THROWS_AS(complete_from_poc(target, donor, code_link("d", "t", 0.3), cfg), ContractError);
        CHECK_THROWS_AS(complete_from_poc(target, donor, code_link("d", "x", 0.8), cfg), ContractError);
        PocLink verdict{"d", "t", LinkBasis::classifier(), 0.1, PairKind::code(LanguageId::Python)};
        CHECK_NOTHROW(complete_from_poc(target, donor, verdict, cfg));
    }

    TEST_CASE("config validation") {
        CompletionConfig cfg;
        CHECK_NOTHROW(cfg.validate());
        cfg.text_threshold = 1.01;
        CHECK_THROWS_AS(cfg.validate(), ContractError);
        cfg = {};
        cfg.run_id.clear();
        CHECK_THROWS_AS(cfg.validate(), ContractError);
    }

    TEST_CASE("the higher-similarity donor fills the gap first") {
        auto target = tagged("t");
        auto strong = tagged("s");
        auto weak = tagged("w");
        pt::add_original(strong, Aspect::Author, {"strong author"});
        pt::add_original(weak, Aspect::Author, {"weak author"});
        Corpus c{{target, strong, weak}};
        const auto res = run_completion(c, {}, {code_link("t", "w", 0.96), code_link("s", "t", 0.97)}, {});
        CHECK(texts(*res.corpus.find("t"), Aspect::Author) == std::vector<std::string>{"strong author"});
        REQUIRE(res.records.size() == 1);
        CHECK(res.records[0].origin.donor == "s");
    }

    TEST_CASE("no chained propagation within a run") {
        auto a = tagged("a");
        auto b = tagged("b");
        auto c = tagged("c");
        pt::add_original(a, Aspect::Title, {"from a"});
        Corpus corpus{{a, b, c}};
        const auto res = run_completion(corpus, {}, {code_link("a", "b", 0.9), code_link("b", "c", 0.8)}, {});
        CHECK(texts(*res.corpus.find("b"), Aspect::Title) == std::vector<std::string>{"from a"});
        CHECK(res.corpus.find("c")->aspects.empty(Aspect::Title));
    }

    TEST_CASE("run_completion invariants") {
        auto a = tagged("a", {"SLMail"});
        auto b = tagged("b");
        pt::add_original(a, Aspect::Author, {"Muts"});
        pt::add_original(b, Aspect::Reference, {"https://www.exploit-db.com/exploits/638"});
        Corpus corpus{{a, b}};
        CveDb db{{"CVE-2003-0264", slmail()}};
        CompletionConfig cfg;
        cfg.run_id = "r1";
        const auto res = run_completion(corpus, db, {code_link("a", "b", 0.6), code_link("a", "b", 0.4)}, cfg);
        // Originals unchanged.
        for (std::size_t i = 0; i < corpus.reports.size(); ++i) {
            for (const auto s : kAllAspects) {
                std::vector<AspectValue> before, after;
                for (const auto& v : corpus.reports[i].aspects.slot(s)) if (v.provenance.is_original()) before.push_back(v);
                for (const auto& v : res.corpus.reports[i].aspects.slot(s)) if (v.provenance.is_original()) after.push_back(v);
                CHECK(before == after);
            }
        }
        for (const auto& r : res.records) {
            CHECK(r.run_id == "r1");
            const auto* t = res.corpus.find(r.target);
            REQUIRE(t != nullptr);
            CHECK(t->aspects.contains(r.slot, r.value));
            if (r.origin.kind == CompletionOrigin::Kind::FromPoc) CHECK(r.origin.similarity >= 0.5);
        }
        CompletionConfig serial = cfg;
        serial.parallel = false;
        const auto res2 = run_completion(corpus, db, {code_link("a", "b", 0.6), code_link("a", "b", 0.4)}, serial);
        CHECK(res2.records == res.records);
        CHECK(res2.corpus == res.corpus);
        CHECK_THROWS_AS(run_completion(corpus, db, {code_link("a", "zz", 0.9)}, cfg), DataError);
    }

    TEST_CASE("records serialize with a fixed field order and replay") {
        auto a = tagged("a", {"SLMail"});
        auto b = tagged("b");
        pt::add_original(b, Aspect::Author, {"Muts"});
        Corpus corpus{{a, b}};
        CveDb db{{"CVE-2003-0264", slmail()}};
        const auto res = run_completion(corpus, db, {code_link("a", "b", 0.7)}, {});
        const auto text = serialize_records(res.records);
        CHECK(text.rfind("{\"run_id\":", 0) == 0);
        CHECK(text.find("\"target\"") < text.find("\"slot\""));
        CHECK(text.find("\"slot\"") < text.find("\"value\""));
        CHECK(text.find("\"value\"") < text.find("\"origin\""));
        CHECK(deserialize_records(text) == res.records);
        CHECK(replay_records(corpus, res.records) == res.corpus);

        auto dup = res.records;
        dup.push_back(dup.front());
        CHECK_THROWS_AS(replay_records(corpus, dup), DataError);
        auto unknown = res.records;
        unknown.front().target = "ghost";
        CHECK_THROWS_AS(replay_records(corpus, unknown), DataError);
    }
}
