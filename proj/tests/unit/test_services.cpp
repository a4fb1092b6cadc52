#include "pocfuse/services.hpp"

#include "support.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <thread>

using namespace pocfuse;
namespace pt = pocfuse::testing;
using Json = nlohmann::json;

namespace {

class LocalServer {
public:
    LocalServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_SUITE("services") {
    TEST_CASE("endpoint parsing") {
        const auto e = Endpoint::parse("http://localhost:9000/extract");
        CHECK(e.host == "localhost");
        CHECK(e.port == 9000);
        CHECK(e.path == "/extract");
        const auto d = Endpoint::parse("http://svc");
        CHECK(d.port == 80);
        CHECK(d.path == "/");
        CHECK_THROWS_AS(Endpoint::parse("https://svc"), ContractError);
        CHECK_THROWS_AS(Endpoint::parse("http://svc:99999/"), ContractError);
        CHECK_THROWS_AS(Endpoint::parse("http://:80/"), ContractError);
    }

    TEST_CASE("extractor response parsing") {
        const auto ex = HttpStructuredExtractor::parse_response(
            R"({"schema_version": 1, "author": [{"text": "Muts", "start": 3, "end": 7}], "software": []})");
        REQUIRE(ex.slot(StructuredSlot::Author).size() == 1);
        CHECK(ex.slot(StructuredSlot::Author)[0] == Span{"Muts", 3, 7});
        CHECK_THROWS_AS(HttpStructuredExtractor::parse_response(R"({"colour": []})"), ServiceError);
        CHECK_THROWS_AS(HttpStructuredExtractor::parse_response(R"({"author": [{"text": "x", "start": -1, "end": 2}]})"),
                        ServiceError);
        CHECK_THROWS_AS(HttpStructuredExtractor::parse_response(R"({"schema_version": 2})"), ServiceError);
        CHECK_THROWS_AS(HttpStructuredExtractor::parse_response("not json"), ServiceError);
    }

    TEST_CASE("classifier response parsing") {
        const auto v = HttpPairClassifier::parse_response(R"({"same": true, "confidence": 0.93})");
        CHECK(v.same_vulnerability);
        CHECK(v.confidence == 0.93);
        CHECK_THROWS_AS(HttpPairClassifier::parse_response(R"({"same": true, "confidence": 1.2})"), ServiceError);
        CHECK_THROWS_AS(HttpPairClassifier::parse_response(R"({"same": "yes", "confidence": 0.2})"), ServiceError);
    }

    TEST_CASE("extractor round trip against a local service") {
        LocalServer s;
        Json seen;
        s.server().Post("/extract", [&](const httplib::Request& req, httplib::Response& res) {
            seen = Json::parse(req.body);
            const std::string content = seen["content"];
            const auto at = content.find("joeyj");
            Json body = {{"schema_version", 1}, {"author", {{{"text", "joeyj"}, {"start", at}, {"end", at + 5}}}}};
            res.set_content(body.dump(), "application/json");
        });
        const HttpStructuredExtractor ex(s.url("/extract"));
        const auto r = pt::make_report("r1", ContentKind::text(), "Written by joeyj.");
        Degradation d;
        const auto out = extract_structured_aspects(r, ex, &d);
        CHECK(d.fallbacks.load() == 0);
        CHECK(out.slot(StructuredSlot::Author).at(0).text == "joeyj");
        CHECK(seen["id"] == "r1");
        CHECK(seen["schema_version"] == 1);
    }

    TEST_CASE("bad spans and server errors fall back to the pattern extractor") {
        LocalServer s;
        s.server().Post("/bad", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"author": [{"text": "ghost", "start": 0, "end": 500}]})", "application/json");
        });
        s.server().Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
        const auto r = pt::make_report("r1", ContentKind::text(), "Author: Muts\n");
        Degradation d;
        CHECK(extract_structured_aspects(r, HttpStructuredExtractor(s.url("/bad")), &d)
                  .slot(StructuredSlot::Author)
                  .at(0)
                  .text == "Muts");
        CHECK_THROWS_AS(HttpStructuredExtractor(s.url("/fail")).extract(r), ServiceError);
        CHECK(extract_structured_aspects(r, HttpStructuredExtractor(s.url("/fail")), &d)
                  .slot(StructuredSlot::Author)
                  .at(0)
                  .text == "Muts");
        CHECK(d.fallbacks.load() == 2);
    }

    TEST_CASE("unreachable and slow services fail within the deadline") {
        LocalServer s;
        s.server().Post("/slow", [](const httplib::Request&, httplib::Response& res) {
            std::this_thread::sleep_for(std::chrono::milliseconds(600));
            res.set_content(R"({"same": true, "confidence": 1.0})", "application/json");
        });
        ServiceOptions opt;
        opt.deadline = std::chrono::milliseconds(150);
        const HttpPairClassifier slow(s.url("/slow"), opt);
        const auto t0 = std::chrono::steady_clock::now();
        CHECK_THROWS_AS(slow.classify({"a", "b", "c", "d"}), ServiceError);
        CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(550));
        const HttpPairClassifier closed("http://127.0.0.1:1/", opt);
        CHECK_THROWS_AS(closed.classify({"a", "b", "c", "d"}), ServiceError);
    }

    TEST_CASE("in-flight requests are bounded") {
        LocalServer s;
        std::atomic<int> current{0}, peak{0};
        s.server().Post("/c", [&](const httplib::Request&, httplib::Response& res) {
            const int now = ++current;
            int p = peak.load();
            while (now > p && !peak.compare_exchange_weak(p, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(30));
            --current;
            res.set_content(R"({"same": false, "confidence": 0.1})", "application/json");
        });
        ServiceOptions opt;
        opt.max_in_flight = 2;
        const HttpPairClassifier c(s.url("/c"), opt);
        std::vector<std::thread> workers;
        for (int i = 0; i < 8; ++i) workers.emplace_back([&] { c.classify({"a", "b", "c", "d"}); });
        for (auto& w : workers) w.join();
        CHECK(peak.load() <= 2);
        CHECK(peak.load() >= 1);
    }

    TEST_CASE("classifier failures degrade to the heuristic") {
        auto a = pt::make_report("a", ContentKind::text(), "alpha beta");
        auto b = pt::make_report("b", ContentKind::text(), "alpha beta");
        a.software = b.software = {"X"};
        ServiceOptions opt;
        opt.deadline = std::chrono::milliseconds(200);
        const HttpPairClassifier down("http://127.0.0.1:1/", opt);
        const HeuristicPairClassifier h;
        ClassifierDegradation d;
        const auto v = classify_pair(down, a, b, &h, &d);
        CHECK(v.same_vulnerability);
        CHECK(d.fallbacks.load() == 1);
    }
}
