#include "reflectrag/http_backends.hpp"

#include "reflectrag/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <thread>

namespace reflectrag {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL must start with http:// or https://: " + url);
    }
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("unsupported URL scheme \"" + scheme + "\" in " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(HttpTransportOptions options) : options_(std::move(options)) {}

    HttpResponse post_json(const std::string& url, const std::string& body) const override {
        const auto parsed = split_url(url);
        httplib::Client client(parsed.origin);
        client.set_connection_timeout(options_.connect_timeout);
        client.set_read_timeout(options_.read_timeout);
        client.set_write_timeout(options_.read_timeout);
        httplib::Headers headers;
        if (!options_.bearer_token.empty()) {
            headers.emplace("Authorization", "Bearer " + options_.bearer_token);
        }
        auto result = client.Post(parsed.path, headers, body, "application/json");
        if (!result) {
            throw BackendError("POST " + url + " failed: " + httplib::to_string(result.error()));
        }
        return {result->status, result->body};
    }

private:
    HttpTransportOptions options_;
};

bool retryable_status(int status) {
    return status == 429 || status >= 500;
}

} // namespace

std::unique_ptr<HttpTransport> make_http_transport(HttpTransportOptions options) {
    return std::make_unique<HttplibTransport>(std::move(options));
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
    const double scaled = static_cast<double>(policy.initial_backoff.count()) *
                          std::pow(policy.multiplier, std::max(0, attempt - 1));
    const double capped = std::min(scaled, static_cast<double>(policy.max_backoff.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

HttpResponse post_with_retries(const HttpTransport& transport, const std::string& url,
                               const std::string& body, const RetryPolicy& policy,
                               const std::function<void(std::chrono::milliseconds)>& sleep) {
    const int attempts = std::max(1, policy.max_attempts);
    std::string last_error;
    int last_status = 0;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        spdlog::debug("POST {} attempt {}/{} request={}", url, attempt, attempts, body);
        try {
            HttpResponse response = transport.post_json(url, body);
            spdlog::debug("POST {} status={} response={}", url, response.status, response.body);
            if (response.status >= 200 && response.status < 300) {
                return response;
            }
            last_status = response.status;
            last_error = "status " + std::to_string(response.status);
            if (!retryable_status(response.status)) {
                throw BackendError("POST " + url + " returned non-success " + last_error + ": " +
                                       response.body.substr(0, 200),
                                   response.status, attempt);
            }
        } catch (const BackendError& e) {
            if (e.status() != 0 && !retryable_status(e.status())) {
                throw;
            }
            last_error = e.what();
        }
        if (attempt < attempts) {
            const auto delay = backoff_delay(policy, attempt);
            if (sleep) {
                sleep(delay);
            } else {
                std::this_thread::sleep_for(delay);
            }
        }
    }
    throw BackendError("POST " + url + ": retries exhausted after " + std::to_string(attempts) +
                           " attempts (last error: " + last_error + ")",
                       last_status, attempts);
}

ChatCompletionBackend::ChatCompletionBackend(std::shared_ptr<const HttpTransport> transport,
                                             std::string url, std::string model,
                                             double temperature, RetryPolicy retry)
    : transport_(std::move(transport)), url_(std::move(url)), model_(std::move(model)),
      temperature_(temperature), retry_(retry) {}

std::string ChatCompletionBackend::request_body(std::string_view model,
                                                std::span<const ChatMessage> messages,
                                                double temperature) {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : messages) {
        j["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    j["temperature"] = temperature;
    return j.dump();
}

std::string ChatCompletionBackend::parse_response(std::string_view body) {
    if (body.empty()) {
        throw EmptyCompletionError("chat endpoint returned an empty body");
    }
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw BackendError("chat endpoint returned malformed JSON");
    }
    const auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array() || choices->empty()) {
        throw BackendError("chat response has no choices");
    }
    const auto& first = (*choices)[0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
        throw BackendError("chat response choice has no message content");
    }
    std::string content = first["message"]["content"].get<std::string>();
    if (content.empty()) {
        throw EmptyCompletionError("chat endpoint returned empty content");
    }
    return content;
}

std::string ChatCompletionBackend::complete(std::span<const ChatMessage> messages) const {
    const auto response =
        post_with_retries(*transport_, url_, request_body(model_, messages, temperature_), retry_);
    return parse_response(response.body);
}

EmbeddingEndpointProvider::EmbeddingEndpointProvider(std::shared_ptr<const HttpTransport> transport,
                                                     std::string url, std::string model,
                                                     std::size_t dim, RetryPolicy retry)
    : transport_(std::move(transport)), url_(std::move(url)), model_(std::move(model)), dim_(dim),
      retry_(retry) {
    if (dim_ == 0) {
        throw ConfigError("embedding dimension must be positive");
    }
}

std::vector<Embedding> EmbeddingEndpointProvider::parse_response(std::string_view body,
                                                                 std::size_t expected,
                                                                 std::size_t dim) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("data") || !j["data"].is_array()) {
        throw BackendError("embedding response lacks a \"data\" array");
    }
    std::vector<Embedding> out(expected);
    std::vector<bool> filled(expected, false);
    for (const auto& item : j["data"]) {
        if (!item.contains("index") || !item["index"].is_number_integer() ||
            !item.contains("embedding") || !item["embedding"].is_array()) {
            throw BackendError("malformed embedding item");
        }
        const auto index = item["index"].get<std::int64_t>();
        if (index < 0 || static_cast<std::size_t>(index) >= expected || filled[index]) {
            throw BackendError("embedding index " + std::to_string(index) + " out of range");
        }
        Embedding v = item["embedding"].get<Embedding>();
        if (v.size() != dim) {
            throw BackendError("embedding of length " + std::to_string(v.size()) +
                               ", expected " + std::to_string(dim));
        }
        out[index] = std::move(v);
        filled[index] = true;
    }
    if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
        throw BackendError("embedding response is missing inputs");
    }
    return out;
}

std::vector<Embedding> EmbeddingEndpointProvider::embed(std::span<const std::string> texts) const {
    if (texts.empty()) {
        return {};
    }
    nlohmann::ordered_json j;
    j["input"] = std::vector<std::string>(texts.begin(), texts.end());
    j["model"] = model_;
    const auto response = post_with_retries(*transport_, url_, j.dump(), retry_);
    return parse_response(response.body, texts.size(), dim_);
}

NliEndpointVerifier::NliEndpointVerifier(std::shared_ptr<const HttpTransport> transport,
                                         std::string url, RetryPolicy retry)
    : transport_(std::move(transport)), url_(std::move(url)), retry_(retry) {}

NliJudgement NliEndpointVerifier::parse_response(std::string_view body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("label") || !j["label"].is_string()) {
        throw BackendError("NLI response lacks a string \"label\"");
    }
    const auto label = parse_nli_label(j["label"].get<std::string>());
    if (!label) {
        throw BackendError("NLI response has unknown label \"" + j["label"].get<std::string>() +
                           "\"");
    }
    const auto scores = j.find("scores");
    if (scores == j.end() || !scores->is_object() || !scores->contains("entailment") ||
        !(*scores)["entailment"].is_number()) {
        throw BackendError("NLI response lacks scores.entailment");
    }
    const double entailment = (*scores)["entailment"].get<double>();
    return {*label, std::clamp(entailment, 0.0, 1.0)};
}

NliJudgement NliEndpointVerifier::classify(std::string_view premise,
                                           std::string_view hypothesis) const {
    nlohmann::ordered_json j;
    j["premise"] = premise;
    j["hypothesis"] = hypothesis;
    const auto response = post_with_retries(*transport_, url_, j.dump(), retry_);
    return parse_response(response.body);
}

} // namespace reflectrag
