#include "reflectrag/generation.hpp"

#include "reflectrag/errors.hpp"
#include "reflectrag/text_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace reflectrag {

namespace {

constexpr std::string_view kSystemInstructions =
    "You are a careful clinical question-answering assistant. Answer using only the numbered "
    "evidence passages provided by the user. Ground every claim in that evidence and cite the "
    "passage numbers you rely on in square brackets. Exercise clinical caution: if the evidence "
    "does not support a claim, do not make it. Never invent findings, dosages, or study results. "
    "Reply with a single JSON object and nothing else.";

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && lower_ascii(a) == lower_ascii(b);
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

// Maps a free-form answer to a canonical label, or nullopt when none matches.
std::optional<std::string> canonical_label(std::string_view answer,
                                           std::span<const std::string> labels) {
    std::string_view a = trim(answer);
    constexpr std::string_view kStrip = "()[]*\"'.:,; \t";
    while (!a.empty() && kStrip.find(a.front()) != std::string_view::npos) {
        a.remove_prefix(1);
    }
    while (!a.empty() && kStrip.find(a.back()) != std::string_view::npos) {
        a.remove_suffix(1);
    }
    for (const auto& label : labels) {
        if (iequals(a, label)) {
            return label;
        }
    }
    // "B. Metformin" or "Yes, because ..." : leading alphanumeric run.
    std::size_t run = 0;
    while (run < a.size() && std::isalnum(static_cast<unsigned char>(a[run]))) {
        ++run;
    }
    if (run > 0 && run < a.size()) {
        const std::string_view head = a.substr(0, run);
        for (const auto& label : labels) {
            if (iequals(head, label)) {
                return label;
            }
        }
    }
    return std::nullopt;
}

std::vector<std::string> clean_statements(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& s : raw) {
        const auto t = trim(s);
        if (!t.empty()) {
            out.emplace_back(t);
        }
    }
    return out;
}

std::optional<GenerationResult> parse_structured(std::string_view raw,
                                                 std::span<const std::string> labels) {
    const std::string_view object = find_json_object(raw);
    if (object.empty()) {
        return std::nullopt;
    }
    nlohmann::json j = nlohmann::json::parse(object, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("answer") || !j["answer"].is_string()) {
        return std::nullopt;
    }

    GenerationResult result;
    result.raw = std::string(raw);
    const auto answer = j["answer"].get<std::string>();
    const auto label = canonical_label(answer, labels);
    result.answer = label.value_or(std::string(trim(answer)));

    std::vector<std::string> statements;
    if (const auto it = j.find("rationale"); it != j.end()) {
        if (it->is_array()) {
            for (const auto& s : *it) {
                if (s.is_string()) {
                    statements.push_back(s.get<std::string>());
                }
            }
        } else if (it->is_string()) {
            statements = split_sentences(it->get<std::string>());
        }
    }
    result.statements = clean_statements(statements);
    result.parse_ok = label.has_value() && !result.statements.empty();
    return result;
}

// "Answer: <label>" on its own line (case-insensitive, optional markdown bold).
std::optional<std::pair<std::string, std::size_t>> find_answer_line(
    const std::vector<std::string>& lines) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = trim(lines[i]);
        while (!line.empty() && (line.front() == '*' || line.front() == '#')) {
            line.remove_prefix(1);
        }
        line = trim(line);
        if (line.size() < 7 || !iequals(line.substr(0, 6), "answer")) {
            continue;
        }
        std::string_view rest = line.substr(6);
        while (!rest.empty() && rest.front() == '*') {
            rest.remove_prefix(1);
        }
        rest = trim(rest);
        if (rest.empty() || (rest.front() != ':' && rest.front() != '-')) {
            continue;
        }
        rest.remove_prefix(1);
        return std::make_pair(std::string(trim(rest)), i);
    }
    return std::nullopt;
}

GenerationResult parse_fallback(std::string_view raw, std::span<const std::string> labels) {
    GenerationResult result;
    result.raw = std::string(raw);

    std::vector<std::string> lines;
    std::istringstream in{std::string(raw)};
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    const auto answer_line = find_answer_line(lines);
    if (!answer_line) {
        return result;
    }
    const auto label = canonical_label(answer_line->first, labels);
    result.answer = label.value_or(answer_line->first);

    std::string prose;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i == answer_line->second) {
            continue;
        }
        std::string_view line = trim(lines[i]);
        if (line.size() >= 10 && iequals(line.substr(0, 10), "rationale:")) {
            line = trim(line.substr(10));
        }
        if (line.starts_with("- ") || line.starts_with("* ")) {
            line = trim(line.substr(2));
        }
        if (line.empty()) {
            continue;
        }
        if (!prose.empty()) {
            prose += ' ';
        }
        prose += line;
    }
    result.statements = split_sentences(prose);
    result.parse_ok = label.has_value() && !result.statements.empty();
    return result;
}

} // namespace

std::string_view to_string(TaskKind task) {
    return task == TaskKind::multiple_choice ? "multiple_choice" : "binary";
}

TaskKind parse_task_kind(std::string_view text) {
    const std::string t = lower_ascii(trim(text));
    if (t == "multiple_choice" || t == "mc") {
        return TaskKind::multiple_choice;
    }
    if (t == "binary" || t == "yes_no") {
        return TaskKind::binary;
    }
    throw InputError("unknown task kind \"" + std::string(text) + "\"");
}

std::vector<std::string> task_labels(TaskKind task, const OptionMap& options) {
    if (task == TaskKind::binary) {
        return {"yes", "no"};
    }
    std::vector<std::string> labels;
    labels.reserve(options.size());
    for (const auto& [label, text] : options) {
        labels.push_back(label);
    }
    return labels;
}

std::string render_context_passage(std::size_t index, const ContextPassage& passage) {
    std::string out = "[" + std::to_string(index) + "] ";
    if (passage.title && !passage.title->empty()) {
        out += *passage.title;
        out += ". ";
    }
    out += passage.text;
    return out;
}

std::string PromptBundle::user_message() const {
    std::string out;
    out += "Question:\n";
    out += question;
    out += "\n\n";

    const auto labels = task_labels(task, options);
    if (task == TaskKind::multiple_choice) {
        out += "Options:\n";
        for (const auto& [label, text] : options) {
            out += label + ". " + text + "\n";
        }
    } else {
        out += "Options: yes, no\n";
    }
    out += "\n";

    out += "Evidence passages:\n";
    if (context.empty()) {
        out += "(no passages retrieved)\n";
    }
    for (std::size_t i = 0; i < context.size(); ++i) {
        out += render_context_passage(i + 1, context[i]);
        out += "\n";
    }

    if (!history.empty()) {
        out += "\nEarlier attempts at this question left some statements without evidence. "
               "Look for better support or revise those claims.\n";
        for (std::size_t i = 0; i < history.size(); ++i) {
            const auto& h = history[i];
            out += "Previous attempt " + std::to_string(i + 1) + ":\n";
            out += "Query: " + h.query + "\n";
            out += "Answer: " + h.answer + "\n";
            out += "Unsupported statements:\n";
            if (h.unsupported.empty()) {
                out += "(none)\n";
            }
            for (const auto& s : h.unsupported) {
                out += "- " + s + "\n";
            }
        }
    }

    out += "\nRespond with only a JSON object of the form "
           "{\"answer\": \"<one of: " +
           join(labels, ", ") +
           ">\", \"rationale\": [\"<statement>\", ...]}. Each rationale statement must be one "
           "self-contained factual claim supported by the evidence, citing passage numbers in "
           "square brackets.\n";
    return out;
}

PromptBundle build_prompt(std::string_view query, TaskKind task, const OptionMap& options,
                          const RankedList& context, const Corpus& corpus,
                          std::span<const HistoryEntry> history, const PromptOptions& options_cfg) {
    PromptBundle prompt;
    prompt.system_instructions = std::string(kSystemInstructions);
    prompt.question = std::string(query);
    prompt.task = task;
    if (task == TaskKind::multiple_choice) {
        if (options.empty()) {
            throw InputError("multiple-choice question without options");
        }
        prompt.options = options;
    }
    prompt.history.assign(history.begin(), history.end());

    std::size_t used = 0;
    for (const auto& entry : context) {
        const Passage& p = corpus.at(entry.passage_id);
        ContextPassage cp{p.id, p.title, p.text};
        const std::size_t cost =
            render_context_passage(prompt.context.size() + 1, cp).size() + 1;
        if (used + cost > options_cfg.context_char_budget) {
            break;
        }
        used += cost;
        prompt.context.push_back(std::move(cp));
    }
    return prompt;
}

std::vector<ChatMessage> to_messages(const PromptBundle& prompt) {
    return {{"system", prompt.system_instructions}, {"user", prompt.user_message()}};
}

std::string request_key(std::span<const ChatMessage> messages) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& m : messages) {
        j.push_back({{"role", m.role}, {"content", m.content}});
    }
    return sha256_hex(j.dump());
}

std::string generate(const GeneratorBackend& backend, const PromptBundle& prompt) {
    const auto messages = to_messages(prompt);
    std::string raw = backend.complete(messages);
    if (trim(raw).empty()) {
        throw EmptyCompletionError("generator returned an empty completion");
    }
    return raw;
}

ScriptedGenerator::ScriptedGenerator(std::vector<Rule> rules) : rules_(std::move(rules)) {}

std::vector<ScriptedGenerator::Rule> ScriptedGenerator::load_rules(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open scripted generator file " + path.string());
    }
    std::vector<Rule> rules;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) {
            continue;
        }
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("completion") ||
            !j["completion"].is_string()) {
            throw InputError(path.string() + ": expected an object with a string \"completion\"",
                             line_number);
        }
        Rule rule;
        rule.completion = j["completion"].get<std::string>();
        if (j.contains("key")) {
            rule.key = j["key"].get<std::string>();
        }
        if (j.contains("contains")) {
            rule.contains = j["contains"].get<std::string>();
        }
        rule.is_default = j.value("default", false);
        if (!rule.key && !rule.contains && !rule.is_default) {
            throw InputError(path.string() + ": rule needs \"key\", \"contains\", or \"default\"",
                             line_number);
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::string ScriptedGenerator::complete(std::span<const ChatMessage> messages) const {
    ++calls_;
    std::string user;
    for (const auto& m : messages) {
        if (m.role == "user") {
            user = m.content;
        }
    }
    {
        std::lock_guard lock(mutex_);
        received_.push_back(user);
    }

    const std::string key = request_key(messages);
    for (const auto& rule : rules_) {
        if (rule.key && *rule.key == key) {
            return rule.completion;
        }
    }
    for (const auto& rule : rules_) {
        if (rule.contains && user.find(*rule.contains) != std::string::npos) {
            return rule.completion;
        }
    }
    for (const auto& rule : rules_) {
        if (rule.is_default) {
            return rule.completion;
        }
    }
    throw BackendError("scripted generator has no completion for request " + key);
}

std::vector<std::string> ScriptedGenerator::received() const {
    std::lock_guard lock(mutex_);
    return received_;
}

GenerationResult parse_generation(std::string_view raw, TaskKind task, const OptionMap& options) {
    const auto labels = task_labels(task, options);
    if (auto structured = parse_structured(raw, labels)) {
        return *std::move(structured);
    }
    return parse_fallback(raw, labels);
}

std::string serialize_generation(const GenerationResult& result) {
    nlohmann::ordered_json j;
    j["answer"] = result.answer;
    j["rationale"] = result.statements;
    return j.dump();
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') {
            continue;
        }
        const bool at_end = i + 1 == text.size();
        if (at_end || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            const auto sentence = trim(text.substr(start, i + 1 - start));
            if (!sentence.empty()) {
                out.emplace_back(sentence);
            }
            start = i + 1;
        }
    }
    if (start < text.size()) {
        const auto tail = trim(text.substr(start));
        if (!tail.empty()) {
            out.emplace_back(tail);
        }
    }
    return out;
}

} // namespace reflectrag
