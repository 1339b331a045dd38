#pragma once

#include "reflectrag/corpus.hpp"
#include "reflectrag/generation.hpp"

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reflectrag {

enum class NliLabel { entailment, neutral, contradict };

std::string_view to_string(NliLabel label);
/// Accepts "entailment", "neutral", "contradict"/"contradiction" (any case).
std::optional<NliLabel> parse_nli_label(std::string_view text);

struct NliJudgement {
    NliLabel label = NliLabel::neutral;
    double confidence = 0.0;
};

/// Premise/hypothesis classifier.
class VerifierBackend {
public:
    virtual ~VerifierBackend() = default;
    /// Throws BackendError on failure.
    virtual NliJudgement classify(std::string_view premise, std::string_view hypothesis) const = 0;
};

struct StatementVerdict {
    std::string statement;
    std::optional<std::string> best_passage;
    NliLabel label = NliLabel::neutral;
    double confidence = 0.0;
    bool supported = false;
    /// Set when a verifier call failed; the statement is then unsupported.
    std::optional<std::string> error;
};

enum class Decision { accept, refine };
std::string_view to_string(Decision decision);

struct SupportReport {
    std::vector<StatementVerdict> verdicts;
    double support_score = 0.0;
    Decision decision = Decision::refine;
    std::vector<std::string> unsupported;
};

struct ReflectionConfig {
    /// Entailment confidence must exceed this for a statement to count as supported.
    double tau = 0.5;
    /// Minimum support score to accept an answer.
    double theta = 0.7;
    /// Concurrent verifier calls.
    std::size_t max_in_flight = 4;
};

/// One verifier call per passage, premise = passage text, hypothesis = statement.
/// The passage with the highest confidence (earliest on ties) is the best support;
/// supported iff its label is entailment and confidence > tau. Empty context gives
/// (neutral, 0, unsupported). Any failed call makes the statement unsupported
/// with `error` set.
StatementVerdict verify_statement(const VerifierBackend& verifier, std::string_view statement,
                                  std::span<const Passage> context, double tau,
                                  std::size_t max_in_flight = 1);

/// Verifies every statement against every passage; verdicts keep statement order.
std::vector<StatementVerdict> verify_statements(const VerifierBackend& verifier,
                                                std::span<const std::string> statements,
                                                std::span<const Passage> context,
                                                const ReflectionConfig& config);

/// Support score = fraction supported (0 for no verdicts); accept iff score >= theta.
SupportReport score_rationale(std::vector<StatementVerdict> verdicts, double theta);

/// Reads {"label": ..., "confidence": ...} from a completion, clamping confidence
/// to [0, 1]. Anything unparseable yields (neutral, 0).
NliJudgement parse_llm_nli(std::string_view raw);

/// Uses a chat generator as the NLI classifier.
class LlmNliVerifier final : public VerifierBackend {
public:
    explicit LlmNliVerifier(std::shared_ptr<const GeneratorBackend> generator)
        : generator_(std::move(generator)) {}
    NliJudgement classify(std::string_view premise, std::string_view hypothesis) const override;

    static std::vector<ChatMessage> render(std::string_view premise, std::string_view hypothesis);

private:
    std::shared_ptr<const GeneratorBackend> generator_;
};

/// Canned judgements read from JSONL. Each line is one rule with "label" and
/// "confidence", or {"error": "..."} to simulate a failing backend, matched by:
///   {"premise_hash": hex, "hypothesis_hash": hex, ...}    exact SHA-256 of both texts
///   {"hypothesis": "...", "premise_contains": "...", ...} literal/substring match;
///                                                       either field may be omitted
///   {"default": true, ...}
/// Hash rules win, then literal rules in file order, then the default.
class ScriptedVerifier final : public VerifierBackend {
public:
    struct Rule {
        std::optional<std::string> premise_hash;
        std::optional<std::string> hypothesis_hash;
        std::optional<std::string> hypothesis;
        std::optional<std::string> premise_contains;
        bool is_default = false;
        std::optional<std::string> error;
        NliJudgement judgement;
    };

    explicit ScriptedVerifier(std::vector<Rule> rules);
    static std::vector<Rule> load_rules(const std::filesystem::path& path);

    /// Throws BackendError for error rules and when nothing matches.
    NliJudgement classify(std::string_view premise, std::string_view hypothesis) const override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::vector<Rule> rules_;
    mutable std::atomic<std::size_t> calls_{0};
};

} // namespace reflectrag
