#include "reflectrag/evaluation.hpp"

#include "reflectrag/concurrency.hpp"
#include "reflectrag/errors.hpp"
#include "reflectrag/text_util.hpp"

#include <algorithm>
#include <limits>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

namespace reflectrag {

namespace {

template <typename Visitor>
void for_each_record(const std::filesystem::path& path, Visitor&& visit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open dataset file " + path.string());
    }
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) {
            continue;
        }
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw InputError(path.string() + ": malformed record", line_number);
        }
        visit(j, line_number);
    }
}

std::string required_string(const nlohmann::json& j, const char* key,
                            const std::filesystem::path& path, std::size_t line) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw InputError(path.string() + ": missing or empty string \"" + key + "\"", line);
    }
    return it->get<std::string>();
}

// Record ids may be strings or integers in the wild; both become strings.
std::string record_id(const nlohmann::json& j, const std::filesystem::path& path,
                      std::size_t line) {
    const auto it = j.find("id");
    if (it != j.end() && it->is_number_integer()) {
        return std::to_string(it->get<std::int64_t>());
    }
    return required_string(j, "id", path, line);
}

void check_unique(std::unordered_set<std::string>& seen, const std::string& id,
                  const std::filesystem::path& path, std::size_t line) {
    if (!seen.insert(id).second) {
        throw InputError(path.string() + ": duplicate item id \"" + id + "\"", line);
    }
}

// Unbiased draw from [0, bound) by rejection; bound > 0.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

} // namespace

std::vector<EvalItem> load_medqa(const std::filesystem::path& path) {
    std::vector<EvalItem> items;
    std::unordered_set<std::string> seen;
    for_each_record(path, [&](const nlohmann::json& j, std::size_t line) {
        EvalItem item;
        item.id = record_id(j, path, line);
        check_unique(seen, item.id, path, line);
        item.question = required_string(j, "question", path, line);
        item.task = TaskKind::multiple_choice;
        const auto options = j.find("options");
        if (options == j.end() || !options->is_object() || options->empty()) {
            throw InputError(path.string() + ": \"options\" must be a non-empty object", line);
        }
        for (const auto& [label, text] : options->items()) {
            if (!text.is_string() || trim(label).empty()) {
                throw InputError(path.string() + ": option \"" + label + "\" is not a string",
                                 line);
            }
            item.options.emplace(std::string(trim(label)), text.get<std::string>());
        }
        item.gold = std::string(trim(required_string(j, "answer", path, line)));
        if (!item.options.contains(item.gold)) {
            throw InputError(path.string() + ": answer \"" + item.gold +
                                 "\" is not among the option labels of item \"" + item.id + "\"",
                             line);
        }
        items.push_back(std::move(item));
    });
    return items;
}

PubMedQaLoad load_pubmedqa(const std::filesystem::path& path) {
    PubMedQaLoad load;
    std::unordered_set<std::string> seen;
    for_each_record(path, [&](const nlohmann::json& j, std::size_t line) {
        EvalItem item;
        item.id = record_id(j, path, line);
        check_unique(seen, item.id, path, line);
        item.question = required_string(j, "question", path, line);
        item.task = TaskKind::binary;
        std::string decision = required_string(j, "final_decision", path, line);
        std::transform(decision.begin(), decision.end(), decision.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (decision == "maybe") {
            ++load.summary.dropped;
            return;
        }
        if (decision != "yes" && decision != "no") {
            throw InputError(path.string() + ": final_decision \"" + decision +
                                 "\" is not yes, no, or maybe",
                             line);
        }
        item.gold = decision;
        load.items.push_back(std::move(item));
        ++load.summary.kept;
    });
    return load;
}

std::vector<EvalItem> sample_items(std::span<const EvalItem> items, std::size_t n,
                                   std::uint64_t seed) {
    if (n > items.size()) {
        throw InputError("cannot sample " + std::to_string(n) + " items from " +
                         std::to_string(items.size()));
    }
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first n slots hold the sample.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + bounded_draw(rng, items.size() - i);
        std::swap(order[i], order[j]);
    }
    std::vector<EvalItem> sample;
    sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        sample.push_back(items[order[i]]);
    }
    return sample;
}

Metrics compute_metrics(std::span<const Prediction> predictions,
                        std::span<const std::string> labels) {
    if (predictions.empty()) {
        throw InputError("cannot compute metrics over zero predictions");
    }
    std::size_t correct = 0;
    for (const auto& p : predictions) {
        if (!p.predicted.empty() && p.predicted == p.gold) {
            ++correct;
        }
    }

    Metrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
    if (labels.empty()) {
        return m;
    }
    double f1_sum = 0.0;
    for (const auto& label : labels) {
        std::size_t tp = 0;
        std::size_t fp = 0;
        std::size_t fn = 0;
        for (const auto& p : predictions) {
            const bool predicted = p.predicted == label;
            const bool gold = p.gold == label;
            tp += predicted && gold;
            fp += predicted && !gold;
            fn += !predicted && gold;
        }
        const std::size_t denom = 2 * tp + fp + fn;
        f1_sum += denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
    }
    m.f1 = f1_sum / static_cast<double>(labels.size());
    return m;
}

EvalRun run_evaluation(std::span<const EvalItem> items, const Pipeline& pipeline,
                       std::size_t workers) {
    std::vector<ItemOutcome> outcomes(items.size());
    std::vector<std::vector<nlohmann::json>> traces(items.size());

    parallel_for(items.size(), workers, [&](std::size_t i) {
        const EvalItem& item = items[i];
        ItemOutcome& out = outcomes[i];
        out.id = item.id;
        out.gold = item.gold;
        try {
            const PipelineResult result = pipeline.run(item.to_question());
            const auto labels = task_labels(item.task, item.options);
            const bool answered = result.termination != Termination::parse_failed &&
                                  std::find(labels.begin(), labels.end(), result.answer) !=
                                      labels.end();
            out.predicted = answered ? result.answer : std::string();
            out.accepted = result.accepted;
            out.iterations = result.iterations.size();
            out.support_score = result.support_score;
            out.termination = std::string(to_string(result.termination));
            for (const auto& record : result.iterations) {
                nlohmann::json j = to_json(record);
                j["item_id"] = item.id;
                traces[i].push_back(std::move(j));
            }
        } catch (const Error& e) {
            out.error = e.what();
            out.termination = "error";
        }
    });

    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return outcomes[a].id < outcomes[b].id; });

    EvalRun run;
    EvalReport& report = run.report;
    report.n = items.size();
    std::set<std::string> label_set;
    std::vector<Prediction> predictions;
    for (const std::size_t i : order) {
        label_set.insert(outcomes[i].gold);
        if (!outcomes[i].predicted.empty()) {
            label_set.insert(outcomes[i].predicted);
        }
        predictions.push_back({outcomes[i].predicted, outcomes[i].gold});
        report.per_item.push_back(std::move(outcomes[i]));
        for (auto& record : traces[i]) {
            run.trace.push_back(std::move(record));
        }
    }
    report.labels.assign(label_set.begin(), label_set.end());
    if (!predictions.empty()) {
        const Metrics m = compute_metrics(predictions, report.labels);
        report.accuracy = m.accuracy;
        report.f1 = m.f1;
    }
    return run;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j;
    j["dataset"] = report.dataset;
    j["n"] = report.n;
    j["accuracy"] = report.accuracy;
    j["f1"] = report.f1;
    j["f1_averaging"] = "macro";
    j["labels"] = report.labels;
    j["seed"] = report.seed;
    j["config"] = report.config.is_null() ? nlohmann::json::object() : report.config;
    j["load_summary"] = {{"kept", report.load_summary.kept},
                         {"dropped", report.load_summary.dropped}};
    std::size_t errors = 0;
    j["per_item"] = nlohmann::json::array();
    for (const auto& item : report.per_item) {
        nlohmann::json row;
        row["id"] = item.id;
        row["predicted"] = item.predicted;
        row["gold"] = item.gold;
        row["accepted"] = item.accepted;
        row["iterations"] = item.iterations;
        row["support_score"] = item.support_score;
        row["termination"] = item.termination;
        if (!item.error.empty()) {
            row["error"] = item.error;
            ++errors;
        }
        j["per_item"].push_back(std::move(row));
    }
    j["errors"] = errors;
    return j;
}

std::string serialize_report(const EvalReport& report) {
    return to_json(report).dump(2) + "\n";
}

} // namespace reflectrag
