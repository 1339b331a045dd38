#pragma once

#include "reflectrag/dense_index.hpp"
#include "reflectrag/generation.hpp"
#include "reflectrag/reflection.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace reflectrag {

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// JSON-over-HTTP POST. Implementations throw BackendError on transport failure
/// (connection refused, timeout) and return any received status otherwise.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& url, const std::string& body) const = 0;
};

struct HttpTransportOptions {
    std::chrono::milliseconds connect_timeout{5000};
    std::chrono::milliseconds read_timeout{120000};
    /// Sent as "Authorization: Bearer <token>" when non-empty.
    std::string bearer_token;
};

/// cpp-httplib client; accepts http:// and https:// URLs.
std::unique_ptr<HttpTransport> make_http_transport(HttpTransportOptions options = {});

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};
};

/// Delay before attempt `attempt` + 1 (attempt is 1-based): initial * multiplier^(attempt-1), capped.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

/// POSTs with bounded exponential backoff. Transport errors, 429 and 5xx are
/// retried; any other non-2xx fails at once. Throws BackendError with the last
/// status and attempt count once attempts are exhausted.
HttpResponse post_with_retries(const HttpTransport& transport, const std::string& url,
                               const std::string& body, const RetryPolicy& policy,
                               const std::function<void(std::chrono::milliseconds)>& sleep = {});

/// Chat-completion endpoint: {"model", "messages", "temperature"} ->
/// {"choices": [{"message": {"content": ...}}]}.
class ChatCompletionBackend final : public GeneratorBackend {
public:
    ChatCompletionBackend(std::shared_ptr<const HttpTransport> transport, std::string url,
                          std::string model, double temperature = 0.0, RetryPolicy retry = {});

    std::string complete(std::span<const ChatMessage> messages) const override;

    static std::string request_body(std::string_view model, std::span<const ChatMessage> messages,
                                    double temperature);
    /// Throws BackendError on a malformed body, EmptyCompletionError on empty content.
    static std::string parse_response(std::string_view body);

private:
    std::shared_ptr<const HttpTransport> transport_;
    std::string url_;
    std::string model_;
    double temperature_;
    RetryPolicy retry_;
};

/// Embedding endpoint: {"input": [...], "model"} -> {"data": [{"index", "embedding"}]}.
class EmbeddingEndpointProvider final : public EmbeddingProvider {
public:
    EmbeddingEndpointProvider(std::shared_ptr<const HttpTransport> transport, std::string url,
                              std::string model, std::size_t dim, RetryPolicy retry = {});

    std::size_t dim() const override { return dim_; }
    std::vector<Embedding> embed(std::span<const std::string> texts) const override;

    /// Reorders by "index"; throws BackendError on missing indices or wrong lengths.
    static std::vector<Embedding> parse_response(std::string_view body, std::size_t expected,
                                                 std::size_t dim);

private:
    std::shared_ptr<const HttpTransport> transport_;
    std::string url_;
    std::string model_;
    std::size_t dim_;
    RetryPolicy retry_;
};

/// NLI classification endpoint: {"premise", "hypothesis"} ->
/// {"label", "scores": {"entailment", "neutral", "contradiction"}}.
/// The judgement confidence is scores.entailment.
class NliEndpointVerifier final : public VerifierBackend {
public:
    NliEndpointVerifier(std::shared_ptr<const HttpTransport> transport, std::string url,
                        RetryPolicy retry = {});

    NliJudgement classify(std::string_view premise, std::string_view hypothesis) const override;

    static NliJudgement parse_response(std::string_view body);

private:
    std::shared_ptr<const HttpTransport> transport_;
    std::string url_;
    RetryPolicy retry_;
};

} // namespace reflectrag
