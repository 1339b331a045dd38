#pragma once

#include "reflectrag/generation.hpp"
#include "reflectrag/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace reflectrag {

struct EvalItem {
    std::string id;
    std::string question;
    TaskKind task = TaskKind::binary;
    OptionMap options;  // empty for binary items
    std::string gold;

    Question to_question() const { return {id, question, task, options}; }
};

struct LoadSummary {
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

/// MedQA JSONL: {"id", "question", "options": {"A": ..., ...}, "answer": label}.
std::vector<EvalItem> load_medqa(const std::filesystem::path& path);

struct PubMedQaLoad {
    std::vector<EvalItem> items;
    LoadSummary summary;
};

/// PubMedQA JSONL: {"id", "question", "final_decision": "yes"|"no"|"maybe"}.
/// "maybe" records are dropped and counted; any other decision is an InputError.
PubMedQaLoad load_pubmedqa(const std::filesystem::path& path);

/// Uniform sample of n items without replacement, in draw order. Uses
/// mt19937_64 with explicit rejection sampling, so the result is identical on
/// every platform for a given seed. Throws InputError when n > items.size().
std::vector<EvalItem> sample_items(std::span<const EvalItem> items, std::size_t n,
                                   std::uint64_t seed);

struct Prediction {
    std::string predicted;  // empty when the item went unanswered
    std::string gold;
};

struct Metrics {
    double accuracy = 0.0;
    double f1 = 0.0;  // macro average over the label set
};

/// Exact-match accuracy and macro F1. Per label, F1 = 2TP / (2TP + FP + FN)
/// with 0/0 taken as 0; labels are averaged unweighted. Throws InputError on
/// empty input.
Metrics compute_metrics(std::span<const Prediction> predictions,
                        std::span<const std::string> labels);

struct ItemOutcome {
    std::string id;
    std::string predicted;
    std::string gold;
    bool accepted = false;
    std::size_t iterations = 0;
    double support_score = 0.0;
    std::string termination;
    std::string error;  // backend failure text; the item then counts as wrong
};

struct EvalReport {
    std::string dataset;
    std::size_t n = 0;
    double accuracy = 0.0;
    double f1 = 0.0;
    std::vector<std::string> labels;
    std::vector<ItemOutcome> per_item;  // sorted by id
    LoadSummary load_summary;
    std::uint64_t seed = 0;
    nlohmann::json config;
};

struct EvalRun {
    EvalReport report;
    /// One record per pipeline iteration, ordered by item id then iteration.
    std::vector<nlohmann::json> trace;
};

/// Runs every item through the pipeline on `workers` threads. Backend errors
/// are recorded per item rather than aborting the run.
EvalRun run_evaluation(std::span<const EvalItem> items, const Pipeline& pipeline,
                       std::size_t workers);

/// Sorted keys, 2-space indent, trailing newline.
std::string serialize_report(const EvalReport& report);
nlohmann::json to_json(const EvalReport& report);

} // namespace reflectrag
