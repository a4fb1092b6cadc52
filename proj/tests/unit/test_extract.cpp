#include "pocfuse/classify.hpp"
#include "pocfuse/extract.hpp"
#include "pocfuse/text.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace pocfuse;
namespace pt = pocfuse::testing;

namespace {

const RuleSet& rules() {
    static const RuleSet r = RuleSet::defaults();
    return r;
}

class ThrowingExtractor final : public StructuredExtractor {
public:
    StructuredExtraction extract(const PocReport&) const override { throw std::runtime_error("down"); }
    std::string name() const override { return "throwing"; }
};

class OutOfRangeExtractor final : public StructuredExtractor {
public:
    StructuredExtraction extract(const PocReport& r) const override {
        StructuredExtraction ex;
        ex.slots[StructuredSlot::Author].push_back({"ghost", r.raw_content.size(), r.raw_content.size() + 5});
        return ex;
    }
    std::string name() const override { return "out-of-range"; }
};

class FixedExtractor final : public StructuredExtractor {
public:
    StructuredExtraction extract(const PocReport& r) const override {
        StructuredExtraction ex;
        const auto at = r.raw_content.find("Muts");
        ex.slots[StructuredSlot::Author].push_back({"Muts", at, at + 4});
        return ex;
    }
    std::string name() const override { return "fixed"; }
};

}  // namespace

TEST_SUITE("extract") {
    TEST_CASE("default rules carry both spellings of the compile keyword") {
        const auto& r = rules();
        CHECK_NOTHROW(r.validate());
        const auto has = [](const std::vector<std::string>& v, const std::string& k) {
            return std::any_of(v.begin(), v.end(), [&](const std::string& x) { return text::fold_equal(x, k); });
        };
        CHECK(has(r.trigger_keywords, "steps"));
        CHECK(has(r.trigger_keywords, "reproduce"));
        CHECK(has(r.trigger_keywords, "complie with"));
        CHECK(has(r.trigger_keywords, "compile with"));
        CHECK(has(r.oracle_keywords, "expected output"));
        CHECK(has(r.oracle_keywords, "poc output"));
        auto broken = r;
        broken.trigger_keywords = {"steps"};
        CHECK_THROWS_AS(broken.validate(), ContractError);
    }

    TEST_CASE("trigger steps") {
        const auto regions = extract_trigger_step("Steps to reproduce:\n1. start server\n2. send payload\n", rules());
        REQUIRE(regions.size() == 1);
        CHECK(regions[0] == "Steps to reproduce:\n1. start server\n2. send payload");
        CHECK(extract_trigger_step("Nothing to see here.\nJust prose.", rules()).empty());
        CHECK(extract_trigger_step("The vendor overstepped the deadline.", rules()).empty());
    }

    TEST_CASE("bare step lists need two consecutive items") {
        CHECK(extract_trigger_step("Fixed in version 2.\n1. upgrade\n", rules()).empty());
        const auto r = extract_trigger_step("Intro\na) open the page\nb) click save\n\nOutro", rules());
        REQUIRE(r.size() == 1);
        CHECK(r[0] == "a) open the page\nb) click save");
        const auto s = extract_trigger_step("Step 1: log in\nStep 2: upload\n", rules());
        REQUIRE(s.size() == 1);
        CHECK(s[0] == "Step 1: log in\nStep 2: upload");
    }

    TEST_CASE("keyword matching is case-insensitive and covers the typo spelling") {
        const auto r = extract_trigger_step("/* Complie with: gcc x.c */\n", rules());
        REQUIRE(r.size() == 1);
        CHECK(r[0] == "/* Complie with: gcc x.c */");
    }

    TEST_CASE("overlapping regions keep the longest") {
        const auto r = extract_trigger_step("To reproduce:\n1. a\n2. b\n3. c\n", rules());
        REQUIRE(r.size() == 1);
        CHECK(r[0] == "To reproduce:\n1. a\n2. b\n3. c");
    }

    TEST_CASE("verification oracle") {
        const auto one = extract_verification_oracle("Expected output: root shell on port 4444\n", rules());
        REQUIRE(one.size() == 1);
        CHECK(one[0] == "Expected output: root shell on port 4444");
        CHECK(extract_verification_oracle("no such keyword", rules()).empty());
        const auto block = extract_verification_oracle("PoC output:\n  uid=0(root)\nnext\n", rules());
        REQUIRE(block.size() == 1);
        CHECK(block[0] == "PoC output:\n  uid=0(root)");
        const auto fenced = extract_verification_oracle("Expected output:\n```\nOK\n```\nafter", rules());
        REQUIRE(fenced.size() == 1);
        CHECK(fenced[0] == "Expected output:\n```\nOK\n```");
    }

    TEST_CASE("references") {
        CHECK(extract_references("see https://www.exploit-db.com/exploits/638.", rules()) ==
              std::vector<std::string>{"https://www.exploit-db.com/exploits/638"});
        CHECK(extract_references("a http://x.example/p and http://x.example/p again", rules()).size() == 1);
        CHECK(extract_references("ftp://mirror.example/patch.tgz and http://a.example", rules()) ==
              std::vector<std::string>{"ftp://mirror.example/patch.tgz", "http://a.example"});
        CHECK(extract_references("(see https://a.example/x_(y))", rules()) ==
              std::vector<std::string>{"https://a.example/x_(y)"});
        CHECK(extract_references("POST http://127.0.0.1/a http://192.168.1.5/ http://target/x http://localhost:8080/",
                                 rules())
                  .empty());
    }

    TEST_CASE("cve ids: dedicated field wins over body mentions") {
        auto r = pt::make_report("e", ContentKind::text(), "Also see CVE-2099-1111.");
        r.cve_field = std::vector<std::string>{"2003-0264"};
        CHECK(extract_cve_ids(r) == std::vector<std::string>{"CVE-2003-0264"});
        r.cve_field.reset();
        CHECK(extract_cve_ids(r) == std::vector<std::string>{"CVE-2099-1111"});
        auto b = pt::make_report("b", ContentKind::text(), "cve-2021-44228 (Log4Shell), CVE-2021-44228 again, CVE-21-1");
        CHECK(extract_cve_ids(b) == std::vector<std::string>{"CVE-2021-44228"});
        auto empty_field = pt::make_report("f", ContentKind::text(), "CVE-2010-0001");
        empty_field.cve_field = std::vector<std::string>{};
        CHECK(extract_cve_ids(empty_field).empty());
    }

    TEST_CASE("pattern extractor reads header lines") {
        auto r = pt::make_report("h", ContentKind::text(), "Author: joeyj\nDate: 2003-05-07\nPlatform: Windows\n");
        const auto ex = PatternStructuredExtractor().extract(r);
        CHECK_NOTHROW(validate_spans(ex, r.raw_content));
        REQUIRE(ex.slot(StructuredSlot::Author).size() == 1);
        CHECK(ex.slot(StructuredSlot::Author)[0].text == "joeyj");
        CHECK(ex.slot(StructuredSlot::PublishTime)[0].text == "2003-05-07");
        CHECK(ex.slot(StructuredSlot::TestPlatform)[0].text == "Windows");
    }

    TEST_CASE("untagged documents use the first non-empty line as title") {
        auto r = pt::make_report("u", ContentKind::text(), "\n\nSome Product 1.2 SQL Injection\nbody text\n");
        const auto ex = PatternStructuredExtractor().extract(r);
        REQUIRE(ex.slot(StructuredSlot::Title).size() == 1);
        CHECK(ex.slot(StructuredSlot::Title)[0].text == "Some Product 1.2 SQL Injection");
        CHECK(ex.slot(StructuredSlot::Author).empty());
        CHECK(ex.slot(StructuredSlot::PublishTime).empty());
    }

    TEST_CASE("http header dumps are not report metadata") {
        auto r = pt::make_report("d", ContentKind::text(),
                                 "Date: 2019-01-02\n\nHTTP/1.1 200 OK\nDate: Mon, 03 Jun 2019 10:00:00 GMT\n\n");
        const auto ex = PatternStructuredExtractor().extract(r);
        REQUIRE(ex.slot(StructuredSlot::PublishTime).size() == 1);
        CHECK(ex.slot(StructuredSlot::PublishTime)[0].text == "2019-01-02");
    }

    TEST_CASE("span validation") {
        StructuredExtraction ex;
        ex.slots[StructuredSlot::Title].push_back({"abc", 0, 3});
        CHECK_NOTHROW(validate_spans(ex, "abcdef"));
        ex.slots[StructuredSlot::Title][0] = {"abd", 0, 3};
        CHECK_THROWS_AS(validate_spans(ex, "abcdef"), ContractError);
        ex.slots[StructuredSlot::Title][0] = {"f", 5, 9};
        CHECK_THROWS_AS(validate_spans(ex, "abcdef"), ContractError);
    }

    TEST_CASE("failing or invalid extractors fall back to the pattern extractor") {
        auto r = pt::make_report("x", ContentKind::text(), "Author: Muts\n");
        Degradation d;
        const auto a = extract_structured_aspects(r, ThrowingExtractor(), &d);
        CHECK(a.slot(StructuredSlot::Author).at(0).text == "Muts");
        const auto b = extract_structured_aspects(r, OutOfRangeExtractor(), &d);
        CHECK(b.slot(StructuredSlot::Author).at(0).text == "Muts");
        CHECK(d.fallbacks.load() == 2);
        const auto c = extract_structured_aspects(r, FixedExtractor(), &d);
        CHECK(c.slot(StructuredSlot::Author).at(0).text == "Muts");
        CHECK(d.fallbacks.load() == 2);
    }

    TEST_CASE("extract_all fills all eight slots on a complete report") {
        auto r = pt::load_fixture_reports(pt::fixture_dir() / "extraction" / "reports.jsonl").at(0);
        const auto out = pt::process(r);
        for (const auto a : kAllAspects) CHECK_MESSAGE(!out.aspects.empty(a), to_string(a));
        for (const auto a : kAllAspects) {
            for (const auto& v : out.aspects.slot(a)) {
                CHECK(v.provenance.is_original());
                CHECK(text::fold_contains(out.raw_content, v.text));
            }
        }
        CHECK(out.cve_ids.size() == 1);
    }

    TEST_CASE("extract_all is idempotent and keeps prefilled values") {
        auto r = pt::make_report("p", ContentKind{}, "Title: X\nAuthor: A\nsee https://a.example/1\n");
        pt::add_original(r, Aspect::Title, {"X"});
        const auto once = pt::process(r);
        CHECK(once.aspects.slot(Aspect::Title).size() == 1);
        const auto twice = extract_all(once, rules(), PatternStructuredExtractor());
        CHECK(twice == once);
        auto unclassified = r;
        CHECK_THROWS_AS(extract_all(unclassified, rules(), PatternStructuredExtractor()), ContractError);
    }

    TEST_CASE("code-only reports without metadata yield only references and cves") {
        auto r = pt::make_report("c", ContentKind{},
                                 "import requests\nimport sys\nrequests.get('https://vendor.example/CVE-2020-1234')\n"
                                 "print(sys.argv)\n");
        const auto out = pt::process(r);
        REQUIRE(out.content_kind.is_code());
        for (const auto a : kAllAspects) {
            if (a != Aspect::Reference) CHECK_MESSAGE(out.aspects.empty(a), to_string(a));
        }
        CHECK(out.cve_ids == std::vector<std::string>{"CVE-2020-1234"});
    }

    TEST_CASE("evaluate_extraction") {
        auto r = pt::make_report("g", ContentKind::text());
        pt::add_original(r, Aspect::Author, {"Alice"});
        Corpus predicted{{r}};
        GoldRecord g{"g", {}};
        g.slots[static_cast<std::size_t>(Aspect::Author)] = {"alice ", "Bob"};
        const auto s = evaluate_extraction({g}, predicted);
        CHECK(s.slot(Aspect::Author).precision == 1.0);
        CHECK(s.slot(Aspect::Author).recall == 0.5);
        CHECK(s.overall.true_positives == 1);
        CHECK(s.overall.false_negatives == 1);

        Corpus empty{{pt::make_report("g", ContentKind::text())}};
        const auto z = evaluate_extraction({g}, empty);
        CHECK(z.overall.precision == 0.0);
        CHECK(z.overall.zero_predictions);
        CHECK(z.overall.recall == 0.0);

        GoldRecord self{"g", {}};
        self.slots[static_cast<std::size_t>(Aspect::Author)] = {"Alice"};
        const auto p = evaluate_extraction({self}, predicted);
        CHECK(p.overall.precision == 1.0);
        CHECK(p.overall.recall == 1.0);

        CHECK_THROWS_AS(evaluate_extraction({GoldRecord{"other", {}}}, predicted), DataError);
    }

    TEST_CASE("gold files parse") {
        const auto gold = parse_gold("{\"id\": \"a\", \"author\": [\"x\"], \"reference\": []}\n");
        REQUIRE(gold.size() == 1);
        CHECK(gold[0].slots[static_cast<std::size_t>(Aspect::Author)] == std::vector<std::string>{"x"});
        CHECK_THROWS_AS(parse_gold("{\"id\": \"a\", \"colour\": [\"x\"]}\n"), DataError);
        CHECK(load_gold(pt::fixture_dir() / "extraction" / "gold.jsonl").size() >= 50);
    }
}
