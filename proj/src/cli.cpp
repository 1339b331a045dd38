#include "reflectrag/cli.hpp"

#include "reflectrag/config.hpp"
#include "reflectrag/engine.hpp"
#include "reflectrag/errors.hpp"
#include "reflectrag/evaluation.hpp"
#include "reflectrag/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

namespace reflectrag {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Flags shared by every subcommand; unset optionals leave the config untouched.
struct CommonFlags {
    std::optional<std::string> config;
    std::optional<std::string> corpus;
    std::optional<std::string> embeddings;
    std::optional<std::string> index_dir;
    std::optional<std::string> mock_backends;
    std::optional<std::size_t> max_iters;
    std::optional<double> tau;
    std::optional<double> theta;
    std::optional<double> k;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> trace;
    bool verbose = false;
};

void add_common_flags(CLI::App& app, CommonFlags& f) {
    app.add_option("--config", f.config, "INI config file (default: $REFLECTRAG_CONFIG)");
    app.add_option("--corpus", f.corpus, "Corpus JSONL");
    app.add_option("--embeddings", f.embeddings, "Passage embeddings JSONL");
    app.add_option("--index-dir", f.index_dir, "Prebuilt index directory");
    app.add_option("--mock-backends", f.mock_backends,
                   "Directory with generator.jsonl and verifier.jsonl scripted backends");
    app.add_option("--max-iters", f.max_iters, "Iteration cap");
    app.add_option("--tau", f.tau, "Entailment confidence threshold");
    app.add_option("--theta", f.theta, "Support score acceptance threshold");
    app.add_option("--k", f.k, "Reciprocal rank fusion constant");
    app.add_option("--seed", f.seed, "Sampling seed");
    app.add_option("--trace", f.trace, "Write one JSONL record per iteration to this file");
    app.add_flag("-v,--verbose", f.verbose, "Log backend traffic");
}

PipelineConfig resolve_config(const CommonFlags& f) {
    PipelineConfig config;
    std::optional<std::string> path = f.config;
    if (!path) {
        if (const char* env = std::getenv("REFLECTRAG_CONFIG"); env && *env) {
            path = env;
        }
    }
    if (path) {
        apply_config_file(config, std::filesystem::path(*path));
    }
    if (f.corpus) config.corpus_path = *f.corpus;
    if (f.embeddings) config.embeddings_path = *f.embeddings;
    if (f.index_dir) config.index_dir = *f.index_dir;
    if (f.mock_backends) config.mock_backends = *f.mock_backends;
    if (f.max_iters) config.max_iters = *f.max_iters;
    if (f.tau) config.tau = *f.tau;
    if (f.theta) config.theta = *f.theta;
    if (f.k) config.fusion_k = *f.k;
    if (f.seed) config.seed = *f.seed;
    config.validate();
    return config;
}

void setup_logging(bool verbose) {
    auto logger = spdlog::get("reflectrag");
    if (!logger) {
        logger = spdlog::stderr_color_mt("reflectrag");
    }
    spdlog::set_default_logger(logger);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

void write_trace(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write trace file " + path.string());
    }
    for (const auto& r : records) {
        out << r.dump() << '\n';
    }
}

int cmd_index(const PipelineConfig& config, const std::string& out_dir, std::ostream& out) {
    const IndexArtifacts artifacts = build_indexes(config);
    save_indexes(artifacts, out_dir);
    out << "indexed " << artifacts.corpus->size() << " passages into " << out_dir << "\n";
    return kExitOk;
}

int cmd_ask(const PipelineConfig& config, const CommonFlags& flags, const std::string& text,
            const std::vector<std::string>& option_args, const std::optional<std::string>& task,
            bool as_json, std::ostream& out) {
    Question question;
    question.id = "ask";
    question.text = text;
    for (const auto& arg : option_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--option expects LABEL=TEXT, got \"" + arg + "\"");
        }
        question.options.emplace(arg.substr(0, eq), arg.substr(eq + 1));
    }
    question.task = question.options.empty() ? TaskKind::binary : TaskKind::multiple_choice;
    if (task) {
        try {
            question.task = parse_task_kind(*task);
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        }
    }
    if (question.task == TaskKind::multiple_choice && question.options.empty()) {
        throw ConfigError("multiple_choice questions need --option LABEL=TEXT");
    }

    const auto pipeline = make_pipeline(config, obtain_indexes(config));
    const PipelineResult result = pipeline->run(question);
    if (flags.trace) {
        std::vector<nlohmann::json> records;
        for (const auto& r : result.iterations) {
            records.push_back(to_json(r));
        }
        write_trace(*flags.trace, records);
    }

    if (as_json) {
        out << to_json(result).dump(2) << "\n";
        return kExitOk;
    }
    out << "answer: " << (result.answer.empty() ? "(none)" : result.answer) << "\n";
    out << "support_score: " << result.support_score << "\n";
    out << "accepted: " << (result.accepted ? "true" : "false") << " ("
        << to_string(result.termination) << ", " << result.iterations.size() << " iteration"
        << (result.iterations.size() == 1 ? "" : "s") << ")\n";
    out << "rationale:\n";
    for (const auto& s : result.statements) {
        out << "  - " << s << "\n";
    }
    return kExitOk;
}

int cmd_eval(PipelineConfig config, const CommonFlags& flags, const std::string& dataset,
             const std::string& input, std::optional<std::size_t> n, const std::string& report_path,
             std::ostream& out) {
    std::vector<EvalItem> items;
    LoadSummary summary;
    if (dataset == "medqa") {
        items = load_medqa(input);
        summary.kept = items.size();
    } else {
        auto load = load_pubmedqa(input);
        items = std::move(load.items);
        summary = load.summary;
    }

    // An explicit --n must fit the dataset; the configured default is capped.
    std::size_t count = std::min(config.sample_n, items.size());
    if (n) {
        if (*n > items.size()) {
            throw InputError("--n " + std::to_string(*n) + " exceeds the " +
                             std::to_string(items.size()) + " loaded items");
        }
        count = *n;
    }
    const auto sample = sample_items(items, count, config.seed);

    const auto pipeline = make_pipeline(config, obtain_indexes(config));
    EvalRun run = run_evaluation(sample, *pipeline, config.workers);
    run.report.dataset = dataset;
    run.report.seed = config.seed;
    run.report.load_summary = summary;
    run.report.config = settings_snapshot(config);

    {
        std::ofstream report(report_path, std::ios::binary | std::ios::trunc);
        if (!report) {
            throw Error("cannot write report " + report_path);
        }
        report << serialize_report(run.report);
    }
    if (flags.trace) {
        write_trace(*flags.trace, run.trace);
    }
    out << dataset << ": n=" << run.report.n << " accuracy=" << run.report.accuracy
        << " macro_f1=" << run.report.f1 << " (kept " << summary.kept << ", dropped "
        << summary.dropped << ") -> " << report_path << "\n";
    return kExitOk;
}

int cmd_serve(const PipelineConfig& config, const std::string& host, int port,
              std::ostream& err) {
    std::shared_ptr<const Pipeline> pipeline;
    if (!config.index_dir.empty() || !config.corpus_path.empty()) {
        pipeline = make_pipeline(config, obtain_indexes(config));
    } else {
        spdlog::warn("no index or corpus configured; /ask will answer 503");
    }
    const AskService service(pipeline);
    if (!serve(service, host, port)) {
        err << "error: cannot listen on " << host << ":" << port << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-reflective hybrid retrieval question answering"};
    app.name("reflectrag");
    app.require_subcommand(1);

    CommonFlags flags;

    auto* index = app.add_subcommand("index", "Build and persist the sparse and dense indexes");
    add_common_flags(*index, flags);
    std::string index_out = "index";
    index->add_option("--out", index_out, "Output directory")->capture_default_str();

    auto* ask = app.add_subcommand("ask", "Answer one question");
    add_common_flags(*ask, flags);
    std::string question;
    std::vector<std::string> option_args;
    std::optional<std::string> task;
    bool as_json = false;
    ask->add_option("--question,-q", question, "Question text")->required();
    ask->add_option("--option", option_args, "Answer option as LABEL=TEXT (repeatable)");
    ask->add_option("--task", task, "multiple_choice or binary (default from --option)");
    ask->add_flag("--json", as_json, "Print the full result as JSON");

    auto* eval = app.add_subcommand("eval", "Evaluate on a MedQA or PubMedQA file");
    add_common_flags(*eval, flags);
    std::string dataset;
    std::string input;
    std::optional<std::size_t> n;
    std::string report_path = "eval_report.json";
    eval->add_option("--dataset", dataset, "Dataset format")
        ->required()
        ->check(CLI::IsMember({"medqa", "pubmedqa"}));
    eval->add_option("--input", input, "Dataset JSONL")->required();
    eval->add_option("--n", n, "Number of items to sample");
    eval->add_option("--report", report_path, "Report output path")->capture_default_str();

    auto* serve_cmd = app.add_subcommand("serve", "Serve POST /ask and GET /healthz");
    add_common_flags(*serve_cmd, flags);
    std::string host = "127.0.0.1";
    int port = 8080;
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--port", port)->capture_default_str()->check(CLI::Range(0, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    setup_logging(flags.verbose);
    PipelineConfig config;
    try {
        config = resolve_config(flags);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*index) {
            return cmd_index(config, index_out, out);
        }
        if (*ask) {
            return cmd_ask(config, flags, question, option_args, task, as_json, out);
        }
        if (*eval) {
            return cmd_eval(config, flags, dataset, input, n, report_path, out);
        }
        return cmd_serve(config, host, port, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace reflectrag
