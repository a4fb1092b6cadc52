#include "pocfuse/classify.hpp"
#include "pocfuse/io.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace pocfuse;
namespace pt = pocfuse::testing;

TEST_SUITE("classify") {
    TEST_CASE("builtin table covers all nine languages") {
        const auto& t = SignatureTable::builtin();
        CHECK(t.version() == 1);
        REQUIRE(t.signatures().size() == kAllLanguages.size());
        for (std::size_t i = 0; i < kAllLanguages.size(); ++i) {
            CHECK(t.signatures()[i].language == kAllLanguages[i]);
            CHECK_FALSE(t.signatures()[i].patterns.empty());
            CHECK(t.signatures()[i].min_hits >= 1);
        }
    }

    TEST_CASE("shipped table file parses to the builtin table") {
        const auto loaded = SignatureTable::load(pt::fixture_dir().parent_path().parent_path() / "data" / "signatures.tsv");
        REQUIRE(loaded.signatures().size() == SignatureTable::builtin().signatures().size());
        for (std::size_t i = 0; i < loaded.signatures().size(); ++i) {
            CHECK(loaded.signatures()[i].patterns.size() == SignatureTable::builtin().signatures()[i].patterns.size());
        }
    }

    TEST_CASE("detect_language") {
        const auto c = detect_language("#include <stdio.h>\nint main(void) { return 0; }\n");
        REQUIRE(c.has_value());
        CHECK(c->language == LanguageId::C_Cpp);
        CHECK(c->hit_count >= 2);
        CHECK_FALSE(detect_language("This vulnerability allows remote attackers to execute code.").has_value());
        CHECK_FALSE(detect_language("").has_value());
        // One keyword quoted in prose stays below min_hits.
        CHECK_FALSE(detect_language("The advisory mentions that int main( is where the bug lives.").has_value());
    }

    TEST_CASE("ties go to the earlier language") {
        const auto t = SignatureTable::parse("version\t1\nmin_hits\truby\t1\nmin_hits\tpython\t1\n"
                                             "ruby\t1\tfoo\npython\t1\tfoo\n");
        const auto m = detect_language("foo", t);
        REQUIRE(m.has_value());
        CHECK(m->language == LanguageId::Python);
        CHECK(m->hit_count == 1);
    }

    TEST_CASE("weights add up per matching pattern") {
        const auto t = SignatureTable::parse("version\t1\nmin_hits\tperl\t3\nperl\t2\tmy \\$\nperl\t1\tuse strict\n");
        CHECK_FALSE(detect_language("my $x = 1; my $y = 2;", t).has_value());
        const auto m = detect_language("use strict;\nmy $x;", t);
        REQUIRE(m.has_value());
        CHECK(m->hit_count == 3);
    }

    TEST_CASE("table parse errors name the line") {
        const auto bad = [](const std::string& body) {
            try {
                SignatureTable::parse(body);
            } catch (const DataError& e) {
                return std::string(e.what());
            }
            return std::string();
        };
        CHECK(bad("version\t1\ncobol\t1\tfoo\n").find("line 2") != std::string::npos);
        CHECK(bad("version\t1\npython\t0\tfoo\n").find("weight") != std::string::npos);
        CHECK(bad("version\t1\npython\t1\t(unclosed\n").find("bad pattern") != std::string::npos);
        CHECK(bad("version\t2\n").find("version") != std::string::npos);
        CHECK(bad("version\t1\nmin_hits\tpython\t0\n").find("min_hits") != std::string::npos);
    }

    TEST_CASE("categorize") {
        auto py = pt::make_report("p", ContentKind{},
                                  "#!/usr/bin/python\nimport socket\ns = socket.socket()\nprint(s)\n");
        const auto out = categorize(py);
        CHECK(out.content_kind == ContentKind::code(LanguageId::Python));
        CHECK(out.raw_content == py.raw_content);
        CHECK(out.id == py.id);
        auto prose = pt::make_report("t", ContentKind{}, "A remote attacker can crash the service.");
        CHECK(categorize(prose).content_kind.is_text());
        CHECK_THROWS_AS(categorize(out), ContractError);
    }

    TEST_CASE("mixed documents with a code block are Code") {
        auto r = pt::make_report("m", ContentKind{},
                                 "Details below.\n\n<?php\n$id = $_GET['id'];\necho $id;\n?>\n\nThanks to the team.\n");
        CHECK(categorize(r).content_kind == ContentKind::code(LanguageId::Php));
    }
}
