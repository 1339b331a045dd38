#pragma once

#include "reflectrag/corpus.hpp"
#include "reflectrag/ranked_list.hpp"

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reflectrag {

enum class TaskKind { multiple_choice, binary };

std::string_view to_string(TaskKind task);
/// Accepts "multiple_choice"/"mc" and "binary"/"yes_no"; throws InputError otherwise.
TaskKind parse_task_kind(std::string_view text);

/// Option label -> option text. Binary tasks use no map; their labels are yes/no.
using OptionMap = std::map<std::string, std::string>;

/// Valid answer labels: the option keys for multiple choice, {"yes", "no"} for binary.
std::vector<std::string> task_labels(TaskKind task, const OptionMap& options);

/// What the prompt carries forward from one unsuccessful iteration.
struct HistoryEntry {
    std::string query;
    std::string answer;
    std::vector<std::string> unsupported;
};

struct ContextPassage {
    std::string id;
    std::optional<std::string> title;
    std::string text;
};

struct PromptOptions {
    /// Upper bound on the rendered evidence block, in bytes.
    std::size_t context_char_budget = 12000;
};

struct PromptBundle {
    std::string system_instructions;
    std::string question;
    TaskKind task = TaskKind::binary;
    OptionMap options;
    std::vector<ContextPassage> context;  // fused order; cited as [1]..[n]
    std::vector<HistoryEntry> history;    // oldest first

    std::string user_message() const;
};

/// Renders passage `index` (1-based) exactly as it appears in the evidence block.
std::string render_context_passage(std::size_t index, const ContextPassage& passage);

/// Throws InputError when a context id is not in the corpus. Passages that
/// would overflow the character budget are dropped whole from the tail.
PromptBundle build_prompt(std::string_view query, TaskKind task, const OptionMap& options,
                          const RankedList& context, const Corpus& corpus,
                          std::span<const HistoryEntry> history, const PromptOptions& options_cfg = {});

struct ChatMessage {
    std::string role;
    std::string content;
};

std::vector<ChatMessage> to_messages(const PromptBundle& prompt);

/// Hex SHA-256 over the role/content sequence; keys scripted completions.
std::string request_key(std::span<const ChatMessage> messages);

class GeneratorBackend {
public:
    virtual ~GeneratorBackend() = default;
    /// Raw completion text. Throws BackendError on failure.
    virtual std::string complete(std::span<const ChatMessage> messages) const = 0;
};

/// Calls the backend with the rendered prompt. Throws EmptyCompletionError on
/// an empty completion.
std::string generate(const GeneratorBackend& backend, const PromptBundle& prompt);

/// Canned completions read from JSONL. Each line is one rule:
///   {"key": "<request_key hex>", "completion": "..."}
///   {"contains": "<substring of the user message>", "completion": "..."}
///   {"default": true, "completion": "..."}
/// Exact keys win, then `contains` rules in file order, then the default.
class ScriptedGenerator final : public GeneratorBackend {
public:
    struct Rule {
        std::optional<std::string> key;
        std::optional<std::string> contains;
        bool is_default = false;
        std::string completion;
    };

    explicit ScriptedGenerator(std::vector<Rule> rules);
    static std::vector<Rule> load_rules(const std::filesystem::path& path);

    /// Throws BackendError when no rule matches.
    std::string complete(std::span<const ChatMessage> messages) const override;

    std::size_t calls() const noexcept { return calls_.load(); }
    /// User messages received so far, in call order.
    std::vector<std::string> received() const;

private:
    std::vector<Rule> rules_;
    mutable std::atomic<std::size_t> calls_{0};
    mutable std::mutex mutex_;
    mutable std::vector<std::string> received_;
};

struct GenerationResult {
    std::string answer;
    std::vector<std::string> statements;
    std::string raw;
    bool parse_ok = false;
};

/// Primary path: a JSON object {"answer": label, "rationale": [string, ...]}
/// found anywhere in the completion. Fallback: an "Answer: <label>" line, with
/// the remaining prose split into sentences on terminal punctuation.
GenerationResult parse_generation(std::string_view raw, TaskKind task, const OptionMap& options);

/// Compact {"answer", "rationale"} JSON; parse_generation reads it back exactly.
std::string serialize_generation(const GenerationResult& result);

/// Splits prose on '.', '!' or '?' followed by whitespace or end of text.
std::vector<std::string> split_sentences(std::string_view text);

} // namespace reflectrag
