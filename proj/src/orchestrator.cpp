#include "reflectrag/orchestrator.hpp"

#include "reflectrag/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <unordered_set>

namespace reflectrag {

namespace {

constexpr std::string_view kBulletPrefix = "- ";

void validate(const PipelineSettings& s) {
    if (s.max_iters < 1) {
        throw ConfigError("max_iters must be >= 1");
    }
    if (!(s.fusion.k > 0.0)) {
        throw ConfigError("fusion k must be > 0");
    }
    if (!(s.reflection.tau >= 0.0 && s.reflection.tau <= 1.0)) {
        throw ConfigError("tau must be in [0, 1]");
    }
    if (!(s.reflection.theta >= 0.0 && s.reflection.theta <= 1.0)) {
        throw ConfigError("theta must be in [0, 1]");
    }
}

void check_alignment(const std::vector<std::string>& index_ids, const Corpus& corpus,
                     std::string_view what) {
    if (index_ids.size() != corpus.size()) {
        throw StateError(std::string(what) + " index has " + std::to_string(index_ids.size()) +
                         " rows but the corpus has " + std::to_string(corpus.size()) +
                         " passages");
    }
    for (std::size_t pos = 0; pos < index_ids.size(); ++pos) {
        if (index_ids[pos] != corpus[pos].id) {
            throw StateError(std::string(what) + " index row " + std::to_string(pos) +
                             " is \"" + index_ids[pos] + "\" but the corpus has \"" +
                             corpus[pos].id + "\"");
        }
    }
}

} // namespace

std::string refine_query(std::string_view query, std::span<const std::string> unsupported) {
    std::string_view original = query;
    std::vector<std::string> appended;

    const std::string separator = "\n" + std::string(kRefinementMarker) + "\n";
    if (const auto at = query.find(separator); at != std::string_view::npos) {
        original = query.substr(0, at);
        std::string_view block = query.substr(at + separator.size());
        while (!block.empty()) {
            const auto eol = block.find('\n');
            std::string_view line = block.substr(0, eol);
            if (line.starts_with(kBulletPrefix)) {
                appended.emplace_back(line.substr(kBulletPrefix.size()));
            }
            if (eol == std::string_view::npos) {
                break;
            }
            block.remove_prefix(eol + 1);
        }
    }

    std::unordered_set<std::string> seen(appended.begin(), appended.end());
    for (const auto& s : unsupported) {
        // Statements are single-line by construction of the block format.
        std::string line = s;
        std::replace(line.begin(), line.end(), '\n', ' ');
        if (line.empty() || !seen.insert(line).second) {
            continue;
        }
        appended.push_back(std::move(line));
    }

    if (appended.empty()) {
        return std::string(query);
    }
    std::string out(original);
    out += separator;
    for (std::size_t i = 0; i < appended.size(); ++i) {
        if (i > 0) {
            out += '\n';
        }
        out += kBulletPrefix;
        out += appended[i];
    }
    return out;
}

std::string_view to_string(Termination termination) {
    switch (termination) {
    case Termination::accepted:
        return "accepted";
    case Termination::parse_failed:
        return "parse_failed";
    case Termination::cap_reached:
        break;
    }
    return "cap_reached";
}

Pipeline::Pipeline(PipelineComponents components, PipelineSettings settings)
    : components_(std::move(components)), settings_(settings) {
    validate(settings_);
    if (!components_.corpus || !components_.sparse || !components_.dense) {
        throw StateError("pipeline requires a corpus with sparse and dense indexes");
    }
    if (!components_.embedder || !components_.generator || !components_.verifier) {
        throw StateError("pipeline requires embedder, generator and verifier backends");
    }
    check_alignment(components_.sparse->ids(), *components_.corpus, "sparse");
    check_alignment(components_.dense->ids(), *components_.corpus, "dense");
    if (components_.dense->size() > 0 && components_.dense->dim() != components_.embedder->dim()) {
        throw StateError("dense index dimension " + std::to_string(components_.dense->dim()) +
                         " differs from embedder dimension " +
                         std::to_string(components_.embedder->dim()));
    }
}

RankedList Pipeline::retrieve(std::string_view query) const {
    const auto tokens = analyze(query);
    const RankedList sparse = components_.sparse->search(tokens, settings_.retrieval_depth);

    RankedList dense;
    if (components_.dense->size() > 0) {
        const std::string text(query);
        const auto vectors = components_.embedder->embed(std::span<const std::string>(&text, 1));
        if (vectors.size() != 1) {
            throw BackendError("embedder returned no vector for the query");
        }
        dense = components_.dense->search(vectors.front(), settings_.retrieval_depth);
    }
    const RankedList lists[] = {sparse, dense};
    return rrf_fuse(lists, settings_.fusion);
}

PipelineResult Pipeline::run(const Question& question) const {
    const Corpus& corpus = *components_.corpus;
    PipelineResult result;
    std::vector<HistoryEntry> history;
    std::string query = question.text;

    for (std::size_t i = 0; i < settings_.max_iters; ++i) {
        IterationRecord record;
        record.iteration = i;
        record.query = query;

        const RankedList fused = retrieve(query);
        const PromptBundle prompt = build_prompt(query, question.task, question.options, fused,
                                                 corpus, history, settings_.prompt);
        for (const auto& cp : prompt.context) {
            record.context_ids.push_back(cp.id);
        }

        const std::string raw = generate(*components_.generator, prompt);
        const GenerationResult generation = parse_generation(raw, question.task, question.options);
        record.answer = generation.answer;
        record.statements = generation.statements;
        record.parse_ok = generation.parse_ok;

        if (generation.parse_ok) {
            std::vector<Passage> context;
            context.reserve(record.context_ids.size());
            for (const auto& id : record.context_ids) {
                context.push_back(corpus.at(id));
            }
            SupportReport report = score_rationale(
                verify_statements(*components_.verifier, generation.statements, context,
                                  settings_.reflection),
                settings_.reflection.theta);
            record.support_score = report.support_score;
            record.unsupported = std::move(report.unsupported);
            record.verdicts = std::move(report.verdicts);
        } else {
            record.support_score = 0.0;
            record.unsupported = generation.statements;
        }

        const bool accept =
            record.parse_ok && record.support_score >= settings_.reflection.theta;
        result.iterations.push_back(record);
        if (accept) {
            result.answer = record.answer;
            result.statements = record.statements;
            result.support_score = record.support_score;
            result.accepted = true;
            result.termination = Termination::accepted;
            result.history_size = history.size();
            return result;
        }
        if (i + 1 == settings_.max_iters) {
            break;
        }
        history.push_back({record.query, record.answer, record.unsupported});
        query = refine_query(query, record.unsupported);
    }
    result.history_size = history.size();

    // Not accepted: report the best-supported parseable iteration, latest on ties.
    const IterationRecord* best = nullptr;
    for (const auto& record : result.iterations) {
        if (record.parse_ok && (!best || record.support_score >= best->support_score)) {
            best = &record;
        }
    }
    result.accepted = false;
    if (best) {
        result.answer = best->answer;
        result.statements = best->statements;
        result.support_score = best->support_score;
        result.termination = Termination::cap_reached;
    } else {
        result.termination = Termination::parse_failed;
    }
    return result;
}

nlohmann::json to_json(const StatementVerdict& verdict) {
    nlohmann::json j;
    j["statement"] = verdict.statement;
    j["best_passage"] = verdict.best_passage ? nlohmann::json(*verdict.best_passage) : nlohmann::json(nullptr);
    j["label"] = to_string(verdict.label);
    j["confidence"] = verdict.confidence;
    j["supported"] = verdict.supported;
    j["error"] = verdict.error ? nlohmann::json(*verdict.error) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const IterationRecord& record) {
    nlohmann::json j;
    j["iteration"] = record.iteration;
    j["query"] = record.query;
    j["context_ids"] = record.context_ids;
    j["answer"] = record.answer;
    j["statements"] = record.statements;
    j["parse_ok"] = record.parse_ok;
    j["support_score"] = record.support_score;
    j["unsupported"] = record.unsupported;
    j["verdicts"] = nlohmann::json::array();
    for (const auto& v : record.verdicts) {
        j["verdicts"].push_back(to_json(v));
    }
    return j;
}

nlohmann::json to_json(const PipelineResult& result) {
    nlohmann::json j;
    j["answer"] = result.answer;
    j["statements"] = result.statements;
    j["support_score"] = result.support_score;
    j["accepted"] = result.accepted;
    j["termination"] = to_string(result.termination);
    j["history_size"] = result.history_size;
    j["iterations"] = nlohmann::json::array();
    for (const auto& r : result.iterations) {
        j["iterations"].push_back(to_json(r));
    }
    return j;
}

} // namespace reflectrag
