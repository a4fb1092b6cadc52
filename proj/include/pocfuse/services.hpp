#pragma once

// Clients for the optional external extraction and pair-classification services.
// Both speak JSON over plain HTTP and throw ServiceError on any transport or schema
// failure, which the callers turn into a fallback to the built-in implementation.

#include "pocfuse/extract.hpp"
#include "pocfuse/link.hpp"

#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>

namespace pocfuse {

class ServiceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kServiceSchemaVersion = 1;

struct ServiceOptions {
    std::chrono::milliseconds deadline{10'000};
    int max_in_flight = 8;
};

struct Endpoint {
    std::string host;
    int port = 80;
    std::string path = "/";

    /// "http://host[:port][/path]". Throws ContractError otherwise.
    static Endpoint parse(std::string_view url);
};

/// POST {schema_version, id, content} -> {schema_version?, <slot>: [{text, start, end}], software?: [...]}.
class HttpStructuredExtractor final : public StructuredExtractor {
public:
    explicit HttpStructuredExtractor(std::string url, ServiceOptions options = {});
    ~HttpStructuredExtractor() override;
    StructuredExtraction extract(const PocReport& report) const override;
    std::string name() const override { return "http"; }

    /// Response parsing, exposed for testing. Throws ServiceError on schema violations.
    static StructuredExtraction parse_response(std::string_view body);

private:
    struct State;
    std::unique_ptr<State> state_;
};

/// POST {schema_version, title_a, content_a, title_b, content_b} -> {same, confidence}.
class HttpPairClassifier final : public PairClassifier {
public:
    explicit HttpPairClassifier(std::string url, ServiceOptions options = {});
    ~HttpPairClassifier() override;
    PairVerdict classify(const PairInput& input) const override;
    std::string name() const override { return "http"; }

    static PairVerdict parse_response(std::string_view body);

private:
    struct State;
    std::unique_ptr<State> state_;
};

}  // namespace pocfuse
