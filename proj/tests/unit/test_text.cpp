#include "pocfuse/io.hpp"
#include "pocfuse/text.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace pocfuse;

TEST_SUITE("text") {
    TEST_CASE("sanitize_utf8 keeps valid text and replaces invalid bytes") {
        CHECK(text::sanitize_utf8("plain ascii") == "plain ascii");
        CHECK(text::sanitize_utf8("caf\xc3\xa9 \xe6\x97\xa5") == "caf\xc3\xa9 \xe6\x97\xa5");
        CHECK(text::sanitize_utf8("a\xff" "b") == "a\xef\xbf\xbd" "b");
        CHECK(text::sanitize_utf8("\xc3") == "\xef\xbf\xbd");
        const auto s = text::sanitize_utf8("x\xed\xa0\x80y");
        CHECK(s.front() == 'x');
        CHECK(s.back() == 'y');
        CHECK(s.find("\xef\xbf\xbd") != std::string::npos);
    }

    TEST_CASE("trim, fold, and case-insensitive helpers") {
        CHECK(text::trim("  \t a b \r\n") == "a b");
        CHECK(text::trim("   ").empty());
        CHECK(text::fold("  SLMail ") == "slmail");
        CHECK(text::fold_equal("SLMail", "slmail "));
        CHECK_FALSE(text::fold_equal("SLMail", "SLMail Pro"));
        CHECK(text::fold_contains("Apache Tomcat", "TOMCAT"));
        CHECK_FALSE(text::fold_contains("nginx", "httpd"));
        CHECK(text::to_lower("\xc3\x89X") == "\xc3\x89x");
    }

    TEST_CASE("split_lines reports offsets and drops carriage returns") {
        const std::string s = "ab\r\ncd\n\nef";
        const auto lines = text::split_lines(s);
        REQUIRE(lines.size() == 4);
        CHECK(lines[0].text == "ab");
        CHECK(lines[1].begin == 4);
        CHECK(s.substr(lines[1].begin, lines[1].end - lines[1].begin) == "cd");
        CHECK(lines[2].text.empty());
        CHECK(lines[3].text == "ef");
    }

    TEST_CASE("sha256 and atomic file writes") {
        CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        testing::TempDir tmp("io");
        const auto p = tmp.path() / "sub" / "f.txt";
        std::filesystem::create_directories(p.parent_path());
        io::write_file(p, "one");
        io::write_file(p, "two");
        CHECK(io::read_file(p) == "two");
        CHECK_THROWS_AS(io::read_file(tmp.path() / "missing"), DataError);
    }
}
