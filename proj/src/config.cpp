#include "reflectrag/config.hpp"

#include "reflectrag/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace reflectrag {

namespace {

namespace pt = boost::property_tree;

template <typename T>
T parse_value(const std::string& key, const std::string& raw) {
    std::istringstream in(raw);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof()) {
        throw ConfigError("invalid value \"" + raw + "\" for " + key);
    }
    if constexpr (std::is_unsigned_v<T>) {
        if (raw.find('-') != std::string::npos) {
            throw ConfigError("negative value \"" + raw + "\" for " + key);
        }
    }
    return value;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string&)>;

template <typename T>
Setter set(T PipelineConfig::*member) {
    return [member](PipelineConfig& c, const std::string& key, const std::string& raw) {
        if constexpr (std::is_same_v<T, std::string>) {
            c.*member = raw;
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
            c.*member = raw;
        } else {
            c.*member = parse_value<T>(key, raw);
        }
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"corpus.path", set(&PipelineConfig::corpus_path)},
        {"embeddings.path", set(&PipelineConfig::embeddings_path)},
        {"embeddings.kind", set(&PipelineConfig::embedder_kind)},
        {"embeddings.endpoint", set(&PipelineConfig::embedder_endpoint)},
        {"embeddings.model", set(&PipelineConfig::embedder_model)},
        {"embeddings.dim", set(&PipelineConfig::embedder_dim)},
        {"index.dir", set(&PipelineConfig::index_dir)},
        {"generator.endpoint", set(&PipelineConfig::generator_endpoint)},
        {"generator.model", set(&PipelineConfig::generator_model)},
        {"generator.temperature", set(&PipelineConfig::generator_temperature)},
        {"generator.api_key_env", set(&PipelineConfig::api_key_env)},
        {"verifier.kind", set(&PipelineConfig::verifier_kind)},
        {"verifier.endpoint", set(&PipelineConfig::verifier_endpoint)},
        {"verifier.model", set(&PipelineConfig::verifier_model)},
        {"backends.mock_dir", set(&PipelineConfig::mock_backends)},
        {"backends.timeout_ms", set(&PipelineConfig::timeout_ms)},
        {"backends.retry_attempts", set(&PipelineConfig::retry_attempts)},
        {"backends.retry_backoff_ms", set(&PipelineConfig::retry_backoff_ms)},
        {"backends.max_in_flight", set(&PipelineConfig::max_in_flight)},
        {"bm25.k1", set(&PipelineConfig::bm25_k1)},
        {"bm25.b", set(&PipelineConfig::bm25_b)},
        {"fusion.k", set(&PipelineConfig::fusion_k)},
        {"fusion.k_out", set(&PipelineConfig::fusion_k_out)},
        {"retrieval.depth", set(&PipelineConfig::retrieval_depth)},
        {"reflection.tau", set(&PipelineConfig::tau)},
        {"reflection.theta", set(&PipelineConfig::theta)},
        {"pipeline.max_iters", set(&PipelineConfig::max_iters)},
        {"pipeline.context_chars", set(&PipelineConfig::context_chars)},
        {"eval.workers", set(&PipelineConfig::workers)},
        {"eval.seed", set(&PipelineConfig::seed)},
        {"eval.n", set(&PipelineConfig::sample_n)},
    };
    return table;
}

void check_unit_interval(double value, const char* name) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw ConfigError(std::string(name) + " must be in [0, 1], got " + std::to_string(value));
    }
}

} // namespace

void PipelineConfig::validate() const {
    check_unit_interval(tau, "reflection.tau");
    check_unit_interval(theta, "reflection.theta");
    check_unit_interval(bm25_b, "bm25.b");
    if (!(bm25_k1 >= 0.0)) {
        throw ConfigError("bm25.k1 must be >= 0");
    }
    if (!(fusion_k > 0.0)) {
        throw ConfigError("fusion.k must be > 0");
    }
    if (max_iters < 1) {
        throw ConfigError("pipeline.max_iters must be >= 1");
    }
    if (retry_attempts < 1) {
        throw ConfigError("backends.retry_attempts must be >= 1");
    }
    if (workers < 1) {
        throw ConfigError("eval.workers must be >= 1");
    }
    if (embedder_kind != "precomputed" && embedder_kind != "http" && embedder_kind != "hashing") {
        throw ConfigError("embeddings.kind must be precomputed, http, or hashing");
    }
    if (verifier_kind != "nli_endpoint" && verifier_kind != "llm_as_nli" &&
        verifier_kind != "scripted") {
        throw ConfigError("verifier.kind must be nli_endpoint, llm_as_nli, or scripted");
    }
}

PipelineSettings PipelineConfig::pipeline_settings() const {
    PipelineSettings s;
    s.retrieval_depth = retrieval_depth;
    s.fusion.k = fusion_k;
    s.fusion.k_out = fusion_k_out;
    s.prompt.context_char_budget = context_chars;
    s.reflection.tau = tau;
    s.reflection.theta = theta;
    s.reflection.max_in_flight = max_in_flight;
    s.max_iters = max_iters;
    return s;
}

void apply_config_file(PipelineConfig& config, std::istream& in) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config file: " + std::string(e.what()));
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            throw ConfigError("config key \"" + section + "\" must be inside a [section]");
        }
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            const auto it = setters().find(full);
            if (it == setters().end()) {
                throw ConfigError("unknown config key \"" + full + "\"");
            }
            it->second(config, full, value.get_value<std::string>());
        }
    }
}

void apply_config_file(PipelineConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    apply_config_file(config, in);
}

nlohmann::json settings_snapshot(const PipelineConfig& c) {
    nlohmann::json j;
    j["bm25"] = {{"k1", c.bm25_k1}, {"b", c.bm25_b}};
    j["fusion"] = {{"k", c.fusion_k}, {"k_out", c.fusion_k_out}};
    j["retrieval"] = {{"depth", c.retrieval_depth}};
    j["reflection"] = {{"tau", c.tau}, {"theta", c.theta}};
    j["pipeline"] = {{"max_iters", c.max_iters}, {"context_chars", c.context_chars}};
    j["generator"] = {{"model", c.generator_model}, {"temperature", c.generator_temperature}};
    j["verifier"] = {{"kind", c.verifier_kind}, {"model", c.verifier_model}};
    j["embeddings"] = {{"kind", c.embedder_kind}, {"model", c.embedder_model}};
    j["mock_backends"] = !c.mock_backends.empty();
    return j;
}

} // namespace reflectrag
