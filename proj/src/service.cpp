#include "reflectrag/service.hpp"

#include "reflectrag/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace reflectrag {

namespace {

ServiceReply error_reply(int status, std::string_view message) {
    return {status, nlohmann::json{{"error", message}}.dump()};
}

} // namespace

AskService::AskService(std::shared_ptr<const Pipeline> pipeline) : pipeline_(std::move(pipeline)) {}

ServiceReply AskService::handle_ask(std::string_view body) const {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return error_reply(400, "request body must be a JSON object");
    }
    const auto question_it = j.find("question");
    if (question_it == j.end() || !question_it->is_string() ||
        question_it->get<std::string>().empty()) {
        return error_reply(400, "\"question\" must be a non-empty string");
    }

    Question question;
    question.id = "request";
    question.text = question_it->get<std::string>();
    question.task = TaskKind::binary;
    if (const auto options = j.find("options"); options != j.end() && !options->is_null()) {
        if (!options->is_object() || options->empty()) {
            return error_reply(400, "\"options\" must be a non-empty object of label -> text");
        }
        for (const auto& [label, text] : options->items()) {
            if (!text.is_string()) {
                return error_reply(400, "option \"" + label + "\" must be a string");
            }
            question.options.emplace(label, text.get<std::string>());
        }
        question.task = TaskKind::multiple_choice;
    }
    if (const auto task = j.find("task"); task != j.end()) {
        try {
            question.task = parse_task_kind(task->is_string() ? task->get<std::string>() : "");
        } catch (const InputError& e) {
            return error_reply(400, e.what());
        }
        if (question.task == TaskKind::multiple_choice && question.options.empty()) {
            return error_reply(400, "multiple_choice questions need \"options\"");
        }
        if (question.task == TaskKind::binary) {
            question.options.clear();
        }
    }

    if (!pipeline_) {
        return error_reply(503, "indexes not loaded");
    }
    try {
        const PipelineResult result = pipeline_->run(question);
        nlohmann::json out;
        out["answer"] = result.answer;
        out["rationale"] = result.statements;
        out["support_score"] = result.support_score;
        out["accepted"] = result.accepted;
        out["iterations"] = result.iterations.size();
        out["termination"] = to_string(result.termination);
        return {200, out.dump()};
    } catch (const BackendError& e) {
        spdlog::warn("/ask backend failure: {}", e.what());
        return error_reply(502, e.what());
    } catch (const StateError& e) {
        return error_reply(503, e.what());
    } catch (const InputError& e) {
        return error_reply(400, e.what());
    }
}

ServiceReply AskService::handle_health() const {
    nlohmann::json out;
    if (!pipeline_) {
        out["status"] = "no_index";
        out["passages"] = 0;
        out["dense_dim"] = 0;
        out["vocabulary"] = 0;
        return {503, out.dump()};
    }
    const auto& c = pipeline_->components();
    out["status"] = "ok";
    out["passages"] = c.corpus->size();
    out["dense_dim"] = c.dense->dim();
    out["vocabulary"] = c.sparse->vocabulary_size();
    return {200, out.dump()};
}

void AskService::mount(httplib::Server& server) const {
    server.Post("/ask", [this](const httplib::Request& req, httplib::Response& res) {
        const auto reply = handle_ask(req.body);
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        const auto reply = handle_health();
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
}

bool serve(const AskService& service, const std::string& host, int port) {
    httplib::Server server;
    service.mount(server);
    spdlog::info("listening on {}:{}", host, port);
    return server.listen(host, port);
}

} // namespace reflectrag
