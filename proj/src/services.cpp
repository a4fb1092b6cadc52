#include "pocfuse/services.hpp"

#include <httplib.h>
#include <json.hpp>

#include <charconv>
#include <semaphore>

namespace pocfuse {

namespace {

using Json = nlohmann::json;

class Gate {
public:
    explicit Gate(int n) : sem_(n < 1 ? 1 : n) {}
    void acquire() { sem_.acquire(); }
    void release() { sem_.release(); }

private:
    std::counting_semaphore<4096> sem_;
};

class GateHold {
public:
    explicit GateHold(Gate& g) : g_(g) { g_.acquire(); }
    ~GateHold() { g_.release(); }
    GateHold(const GateHold&) = delete;
    GateHold& operator=(const GateHold&) = delete;

private:
    Gate& g_;
};

std::string post_json(const Endpoint& ep, const ServiceOptions& opt, const Json& body) {
    httplib::Client client(ep.host, ep.port);
    const auto ms = opt.deadline.count();
    const auto sec = static_cast<time_t>(ms / 1000);
    const auto usec = static_cast<time_t>((ms % 1000) * 1000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    const auto res = client.Post(ep.path, body.dump(), "application/json");
    if (!res) throw ServiceError("request to " + ep.host + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ServiceError("service returned HTTP " + std::to_string(res->status));
    return res->body;
}

Json parse_body(std::string_view body) {
    try {
        auto j = Json::parse(body);
        if (!j.is_object()) throw ServiceError("service response is not an object");
        if (j.contains("schema_version") && j["schema_version"] != kServiceSchemaVersion) {
            throw ServiceError("unsupported service schema version");
        }
        return j;
    } catch (const Json::exception& e) {
        throw ServiceError(std::string("malformed service response: ") + e.what());
    }
}

std::vector<Span> parse_spans(const Json& arr) {
    if (!arr.is_array()) throw ServiceError("slot value must be an array");
    std::vector<Span> out;
    for (const auto& s : arr) {
        if (!s.is_object() || !s.contains("text") || !s.contains("start") || !s.contains("end") ||
            !s["text"].is_string() || !s["start"].is_number_unsigned() || !s["end"].is_number_unsigned()) {
            throw ServiceError("span needs string text and non-negative start/end");
        }
        out.push_back({s["text"].get<std::string>(), s["start"].get<std::size_t>(), s["end"].get<std::size_t>()});
    }
    return out;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view url) {
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme) throw ContractError("service url must start with http://");
    auto rest = url.substr(scheme.size());
    Endpoint ep;
    const auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    ep.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
        const auto port = authority.substr(colon + 1);
        int p = 0;
        const auto res = std::from_chars(port.data(), port.data() + port.size(), p);
        if (res.ec != std::errc() || res.ptr != port.data() + port.size() || p <= 0 || p > 65535) {
            throw ContractError("bad port in service url '" + std::string(url) + "'");
        }
        ep.port = p;
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) throw ContractError("missing host in service url '" + std::string(url) + "'");
    ep.host = std::string(authority);
    return ep;
}

struct HttpStructuredExtractor::State {
    Endpoint endpoint;
    ServiceOptions options;
    mutable Gate gate;
    State(Endpoint e, ServiceOptions o) : endpoint(std::move(e)), options(o), gate(o.max_in_flight) {}
};

HttpStructuredExtractor::HttpStructuredExtractor(std::string url, ServiceOptions options)
    : state_(std::make_unique<State>(Endpoint::parse(url), options)) {}

HttpStructuredExtractor::~HttpStructuredExtractor() = default;

StructuredExtraction HttpStructuredExtractor::parse_response(std::string_view body) {
    const auto j = parse_body(body);
    StructuredExtraction ex;
    for (const auto& [key, value] : j.items()) {
        if (key == "schema_version") continue;
        if (key == "software") {
            ex.software = parse_spans(value);
            continue;
        }
        const auto slot = parse_structured_slot(key);
        if (!slot) throw ServiceError("unknown slot '" + key + "' in service response");
        ex.slots[*slot] = parse_spans(value);
    }
    return ex;
}

StructuredExtraction HttpStructuredExtractor::extract(const PocReport& report) const {
    Json req = {{"schema_version", kServiceSchemaVersion}, {"id", report.id}, {"content", report.raw_content}};
    std::string body;
    {
        GateHold hold(state_->gate);
        body = post_json(state_->endpoint, state_->options, req);
    }
    return parse_response(body);
}

struct HttpPairClassifier::State {
    Endpoint endpoint;
    ServiceOptions options;
    mutable Gate gate;
    State(Endpoint e, ServiceOptions o) : endpoint(std::move(e)), options(o), gate(o.max_in_flight) {}
};

HttpPairClassifier::HttpPairClassifier(std::string url, ServiceOptions options)
    : state_(std::make_unique<State>(Endpoint::parse(url), options)) {}

HttpPairClassifier::~HttpPairClassifier() = default;

PairVerdict HttpPairClassifier::parse_response(std::string_view body) {
    const auto j = parse_body(body);
    if (!j.contains("same") || !j["same"].is_boolean()) throw ServiceError("response needs boolean 'same'");
    if (!j.contains("confidence") || !j["confidence"].is_number()) {
        throw ServiceError("response needs numeric 'confidence'");
    }
    const double c = j["confidence"].get<double>();
    if (!(c >= 0.0 && c <= 1.0)) throw ServiceError("confidence outside [0,1]");
    return {j["same"].get<bool>(), c};
}

PairVerdict HttpPairClassifier::classify(const PairInput& in) const {
    Json req = {{"schema_version", kServiceSchemaVersion},
                {"title_a", in.title_a},
                {"content_a", in.content_a},
                {"title_b", in.title_b},
                {"content_b", in.content_b}};
    std::string body;
    {
        GateHold hold(state_->gate);
        body = post_json(state_->endpoint, state_->options, req);
    }
    return parse_response(body);
}

}  // namespace pocfuse
