#include "reflectrag/reflection.hpp"

#include "reflectrag/concurrency.hpp"
#include "reflectrag/errors.hpp"
#include "reflectrag/text_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace reflectrag {

namespace {

struct CallOutcome {
    NliJudgement judgement;
    std::optional<std::string> error;
};

StatementVerdict assemble_verdict(std::string_view statement, std::span<const Passage> context,
                                  std::span<const CallOutcome> outcomes, double tau) {
    StatementVerdict verdict;
    verdict.statement = std::string(statement);
    if (context.empty()) {
        return verdict;
    }
    for (const auto& outcome : outcomes) {
        if (outcome.error) {
            verdict.error = outcome.error;
            return verdict;
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < outcomes.size(); ++i) {
        if (outcomes[i].judgement.confidence > outcomes[best].judgement.confidence) {
            best = i;
        }
    }
    verdict.best_passage = context[best].id;
    verdict.label = outcomes[best].judgement.label;
    verdict.confidence = outcomes[best].judgement.confidence;
    verdict.supported = verdict.label == NliLabel::entailment && verdict.confidence > tau;
    return verdict;
}

CallOutcome call_verifier(const VerifierBackend& verifier, std::string_view premise,
                          std::string_view hypothesis) {
    try {
        return {verifier.classify(premise, hypothesis), std::nullopt};
    } catch (const std::exception& e) {
        return {{}, std::string(e.what())};
    }
}

} // namespace

std::string_view to_string(NliLabel label) {
    switch (label) {
    case NliLabel::entailment:
        return "entailment";
    case NliLabel::contradict:
        return "contradict";
    case NliLabel::neutral:
        break;
    }
    return "neutral";
}

std::optional<NliLabel> parse_nli_label(std::string_view text) {
    std::string t(trim(text));
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "entailment") {
        return NliLabel::entailment;
    }
    if (t == "neutral") {
        return NliLabel::neutral;
    }
    if (t == "contradict" || t == "contradiction") {
        return NliLabel::contradict;
    }
    return std::nullopt;
}

std::string_view to_string(Decision decision) {
    return decision == Decision::accept ? "accept" : "refine";
}

StatementVerdict verify_statement(const VerifierBackend& verifier, std::string_view statement,
                                  std::span<const Passage> context, double tau,
                                  std::size_t max_in_flight) {
    std::vector<CallOutcome> outcomes(context.size());
    parallel_for(context.size(), max_in_flight, [&](std::size_t i) {
        outcomes[i] = call_verifier(verifier, context[i].text, statement);
    });
    return assemble_verdict(statement, context, outcomes, tau);
}

std::vector<StatementVerdict> verify_statements(const VerifierBackend& verifier,
                                                std::span<const std::string> statements,
                                                std::span<const Passage> context,
                                                const ReflectionConfig& config) {
    const std::size_t per_statement = context.size();
    std::vector<CallOutcome> outcomes(statements.size() * per_statement);
    parallel_for(outcomes.size(), config.max_in_flight, [&](std::size_t i) {
        const std::size_t s = i / per_statement;
        const std::size_t p = i % per_statement;
        outcomes[i] = call_verifier(verifier, context[p].text, statements[s]);
    });

    std::vector<StatementVerdict> verdicts;
    verdicts.reserve(statements.size());
    for (std::size_t s = 0; s < statements.size(); ++s) {
        const auto slice =
            std::span<const CallOutcome>(outcomes).subspan(s * per_statement, per_statement);
        verdicts.push_back(assemble_verdict(statements[s], context, slice, config.tau));
    }
    return verdicts;
}

SupportReport score_rationale(std::vector<StatementVerdict> verdicts, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw ConfigError("theta must be in [0, 1]");
    }
    SupportReport report;
    std::size_t supported = 0;
    for (const auto& v : verdicts) {
        if (v.supported) {
            ++supported;
        } else {
            report.unsupported.push_back(v.statement);
        }
    }
    report.support_score = verdicts.empty() ? 0.0
                                            : static_cast<double>(supported) /
                                                  static_cast<double>(verdicts.size());
    report.decision =
        !verdicts.empty() && report.support_score >= theta ? Decision::accept : Decision::refine;
    report.verdicts = std::move(verdicts);
    return report;
}

NliJudgement parse_llm_nli(std::string_view raw) {
    const std::string_view object = find_json_object(raw);
    if (object.empty()) {
        return {};
    }
    const auto j = nlohmann::json::parse(object, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return {};
    }
    const auto label_it = j.find("label");
    const auto conf_it = j.find("confidence");
    if (label_it == j.end() || !label_it->is_string() || conf_it == j.end() ||
        !conf_it->is_number()) {
        return {};
    }
    const auto label = parse_nli_label(label_it->get<std::string>());
    const double confidence = conf_it->get<double>();
    if (!label || !std::isfinite(confidence)) {
        return {};
    }
    return {*label, std::clamp(confidence, 0.0, 1.0)};
}

std::vector<ChatMessage> LlmNliVerifier::render(std::string_view premise,
                                                std::string_view hypothesis) {
    std::string user = "Premise:\n";
    user += premise;
    user += "\n\nHypothesis:\n";
    user += hypothesis;
    user +=
        "\n\nDoes the premise entail the hypothesis? Reply with only a JSON object "
        "{\"label\": \"entailment\" | \"neutral\" | \"contradict\", \"confidence\": <probability "
        "between 0 and 1 that your label is correct>}.";
    return {{"system",
             "You are a natural language inference classifier for biomedical text. Judge only "
             "whether the premise supports the hypothesis; do not use outside knowledge."},
            {"user", std::move(user)}};
}

NliJudgement LlmNliVerifier::classify(std::string_view premise,
                                      std::string_view hypothesis) const {
    return parse_llm_nli(generator_->complete(render(premise, hypothesis)));
}

ScriptedVerifier::ScriptedVerifier(std::vector<Rule> rules) : rules_(std::move(rules)) {}

std::vector<ScriptedVerifier::Rule> ScriptedVerifier::load_rules(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open scripted verifier file " + path.string());
    }
    std::vector<Rule> rules;
    std::string line;
    std::size_t line_number = 0;
    const auto optional_string = [](const nlohmann::json& j,
                                    const char* key) -> std::optional<std::string> {
        if (const auto it = j.find(key); it != j.end() && it->is_string()) {
            return it->get<std::string>();
        }
        return std::nullopt;
    };
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) {
            continue;
        }
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw InputError(path.string() + ": malformed rule", line_number);
        }
        Rule rule;
        rule.premise_hash = optional_string(j, "premise_hash");
        rule.hypothesis_hash = optional_string(j, "hypothesis_hash");
        rule.hypothesis = optional_string(j, "hypothesis");
        rule.premise_contains = optional_string(j, "premise_contains");
        rule.is_default = j.value("default", false);
        rule.error = optional_string(j, "error");
        if (!rule.error) {
            const auto label = parse_nli_label(j.value("label", ""));
            if (!label || !j.contains("confidence") || !j["confidence"].is_number()) {
                throw InputError(path.string() + ": rule needs \"label\" and \"confidence\"",
                                 line_number);
            }
            rule.judgement = {*label, j["confidence"].get<double>()};
        }
        if (!rule.premise_hash && !rule.hypothesis_hash && !rule.hypothesis &&
            !rule.premise_contains && !rule.is_default) {
            throw InputError(path.string() + ": rule has no matcher", line_number);
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

NliJudgement ScriptedVerifier::classify(std::string_view premise,
                                        std::string_view hypothesis) const {
    ++calls_;
    const auto respond = [](const Rule& rule) {
        if (rule.error) {
            throw BackendError("scripted verifier error: " + *rule.error);
        }
        return rule.judgement;
    };

    const bool any_hash = std::any_of(rules_.begin(), rules_.end(), [](const Rule& r) {
        return r.premise_hash || r.hypothesis_hash;
    });
    if (any_hash) {
        const std::string ph = sha256_hex(premise);
        const std::string hh = sha256_hex(hypothesis);
        for (const auto& rule : rules_) {
            if ((rule.premise_hash || rule.hypothesis_hash) &&
                (!rule.premise_hash || *rule.premise_hash == ph) &&
                (!rule.hypothesis_hash || *rule.hypothesis_hash == hh)) {
                return respond(rule);
            }
        }
    }
    for (const auto& rule : rules_) {
        if (!rule.hypothesis && !rule.premise_contains) {
            continue;
        }
        if (rule.hypothesis && *rule.hypothesis != hypothesis) {
            continue;
        }
        if (rule.premise_contains && premise.find(*rule.premise_contains) == std::string_view::npos) {
            continue;
        }
        return respond(rule);
    }
    for (const auto& rule : rules_) {
        if (rule.is_default) {
            return respond(rule);
        }
    }
    throw BackendError("scripted verifier has no judgement for hypothesis \"" +
                       std::string(hypothesis) + "\"");
}

} // namespace reflectrag
