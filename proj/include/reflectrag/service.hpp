#pragma once

#include "reflectrag/orchestrator.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace httplib {
class Server;
}

namespace reflectrag {

struct ServiceReply {
    int status = 200;
    std::string body;  // JSON
};

/// Read-only question answering over prebuilt indexes.
///
///   POST /ask     {"question": string, "options": {label: text}?, "task": string?}
///                 -> {"answer", "rationale", "support_score", "accepted", "iterations",
///                     "termination"}
///   GET  /healthz -> {"status", "passages", "dense_dim", "vocabulary"}
///
/// Without "options" (and no "task") a question is treated as yes/no.
/// 400 on a malformed body, 503 when no pipeline is loaded, 502 when a backend
/// fails after its retries.
class AskService {
public:
    /// `pipeline` may be null: the service then answers 503.
    explicit AskService(std::shared_ptr<const Pipeline> pipeline);

    ServiceReply handle_ask(std::string_view body) const;
    ServiceReply handle_health() const;

    /// Registers both routes on `server`.
    void mount(httplib::Server& server) const;

private:
    std::shared_ptr<const Pipeline> pipeline_;
};

/// Blocks serving on host:port until the process is stopped.
/// Returns false when the socket cannot be bound.
bool serve(const AskService& service, const std::string& host, int port);

} // namespace reflectrag
