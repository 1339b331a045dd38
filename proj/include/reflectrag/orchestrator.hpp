#pragma once

#include "reflectrag/corpus.hpp"
#include "reflectrag/dense_index.hpp"
#include "reflectrag/fusion.hpp"
#include "reflectrag/generation.hpp"
#include "reflectrag/reflection.hpp"
#include "reflectrag/sparse_index.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reflectrag {

/// Marker line that introduces the appended unsupported statements in a refined query.
inline constexpr std::string_view kRefinementMarker = "Additionally find evidence for:";

/// Returns the original question followed by the marker line and the union of
/// every statement appended so far plus `unsupported`, deduplicated, first
/// occurrence order. Refining an already refined query replaces its block.
/// With nothing to append the query is returned unchanged.
std::string refine_query(std::string_view query, std::span<const std::string> unsupported);

struct Question {
    std::string id;
    std::string text;
    TaskKind task = TaskKind::binary;
    OptionMap options;
};

struct IterationRecord {
    std::size_t iteration = 0;
    std::string query;
    std::vector<std::string> context_ids;
    std::string answer;
    std::vector<std::string> statements;
    bool parse_ok = false;
    double support_score = 0.0;
    std::vector<std::string> unsupported;
    std::vector<StatementVerdict> verdicts;
};

enum class Termination { accepted, cap_reached, parse_failed };
std::string_view to_string(Termination termination);

struct PipelineResult {
    std::string answer;
    std::vector<std::string> statements;
    double support_score = 0.0;
    bool accepted = false;
    Termination termination = Termination::cap_reached;
    std::vector<IterationRecord> iterations;
    /// Records carried into later prompts: one per iteration that was followed by another.
    std::size_t history_size = 0;
};

struct PipelineSettings {
    /// Candidates requested from each retriever before fusion.
    std::size_t retrieval_depth = 32;
    FusionConfig fusion;
    PromptOptions prompt;
    ReflectionConfig reflection;
    std::size_t max_iters = 3;
};

struct PipelineComponents {
    std::shared_ptr<const Corpus> corpus;
    std::shared_ptr<const SparseIndex> sparse;
    std::shared_ptr<const DenseIndex> dense;
    std::shared_ptr<const EmbeddingProvider> embedder;
    std::shared_ptr<const GeneratorBackend> generator;
    std::shared_ptr<const VerifierBackend> verifier;
};

/// Retrieve, generate, verify and refine until the rationale is supported or
/// max_iters iterations have run. Immutable; run() may be called concurrently.
class Pipeline {
public:
    /// Throws StateError when a component is missing or the indexes do not
    /// line up with the corpus, ConfigError on invalid settings.
    Pipeline(PipelineComponents components, PipelineSettings settings);

    PipelineResult run(const Question& question) const;

    /// Sparse + dense retrieval on `query`, fused.
    RankedList retrieve(std::string_view query) const;

    const PipelineSettings& settings() const noexcept { return settings_; }
    const PipelineComponents& components() const noexcept { return components_; }

private:
    PipelineComponents components_;
    PipelineSettings settings_;
};

nlohmann::json to_json(const StatementVerdict& verdict);
nlohmann::json to_json(const IterationRecord& record);
nlohmann::json to_json(const PipelineResult& result);

} // namespace reflectrag
