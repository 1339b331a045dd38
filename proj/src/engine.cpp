#include "reflectrag/engine.hpp"

#include "reflectrag/errors.hpp"
#include "reflectrag/http_backends.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>

namespace reflectrag {

namespace {

constexpr std::size_t kDefaultHashingDim = 64;

std::shared_ptr<const HttpTransport> make_transport(const PipelineConfig& config) {
    HttpTransportOptions options;
    options.read_timeout = std::chrono::milliseconds(config.timeout_ms);
    if (!config.api_key_env.empty()) {
        if (const char* token = std::getenv(config.api_key_env.c_str())) {
            options.bearer_token = token;
        }
    }
    return make_http_transport(std::move(options));
}

RetryPolicy make_retry(const PipelineConfig& config) {
    RetryPolicy retry;
    retry.max_attempts = config.retry_attempts;
    retry.initial_backoff = std::chrono::milliseconds(config.retry_backoff_ms);
    return retry;
}

std::size_t resolve_dim(const PipelineConfig& config, std::size_t index_dim) {
    if (config.embedder_dim != 0) {
        return config.embedder_dim;
    }
    return index_dim;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw StateError("missing index artifact " + path.string());
    }
    return in;
}

} // namespace

std::shared_ptr<const EmbeddingProvider> make_embedder(const PipelineConfig& config,
                                                       std::size_t index_dim) {
    const std::size_t dim = resolve_dim(config, index_dim);
    if (!config.mock_backends.empty() || config.embedder_kind == "hashing") {
        return std::make_shared<HashingEmbeddingProvider>(dim == 0 ? kDefaultHashingDim : dim);
    }
    if (config.embedder_kind == "http") {
        if (config.embedder_endpoint.empty()) {
            throw ConfigError("embeddings.kind = http requires embeddings.endpoint");
        }
        if (dim == 0) {
            throw ConfigError("embeddings.dim is required for the http embedder");
        }
        return std::make_shared<EmbeddingEndpointProvider>(make_transport(config),
                                                           config.embedder_endpoint,
                                                           config.embedder_model, dim,
                                                           make_retry(config));
    }
    return std::make_shared<PrecomputedOnlyProvider>(dim);
}

IndexArtifacts build_indexes(const PipelineConfig& config) {
    if (config.corpus_path.empty()) {
        throw ConfigError("no corpus configured (--corpus or corpus.path)");
    }
    IndexArtifacts artifacts;
    auto corpus = std::make_shared<Corpus>(ingest_corpus(config.corpus_path));
    artifacts.sparse = std::make_shared<SparseIndex>(
        SparseIndex::build(*corpus, {config.bm25_k1, config.bm25_b}));
    if (!config.embeddings_path.empty()) {
        const auto records = load_embeddings(config.embeddings_path);
        artifacts.dense = std::make_shared<DenseIndex>(DenseIndex::build(*corpus, records));
    } else if (config.embedder_kind == "precomputed" && config.mock_backends.empty()) {
        throw ConfigError(
            "no embeddings source: pass --embeddings or configure an embedder kind");
    } else {
        const auto embedder = make_embedder(config, 0);
        artifacts.dense = std::make_shared<DenseIndex>(DenseIndex::build(*corpus, *embedder));
    }
    spdlog::info("indexed {} passages ({} terms, dense dim {})", corpus->size(),
                 artifacts.sparse->vocabulary_size(), artifacts.dense->dim());
    artifacts.corpus = std::move(corpus);
    return artifacts;
}

void save_indexes(const IndexArtifacts& artifacts, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_for_write(dir / "corpus.jsonl");
        write_corpus(*artifacts.corpus, out);
    }
    {
        auto out = open_for_write(dir / "sparse.idx");
        artifacts.sparse->save(out);
    }
    {
        auto out = open_for_write(dir / "dense.idx");
        artifacts.dense->save(out);
    }
    nlohmann::json manifest;
    manifest["format"] = 1;
    manifest["passages"] = artifacts.corpus->size();
    manifest["dense_dim"] = artifacts.dense->dim();
    manifest["bm25"] = {{"k1", artifacts.sparse->params().k1}, {"b", artifacts.sparse->params().b}};
    auto out = open_for_write(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
}

IndexArtifacts load_indexes(const std::filesystem::path& dir) {
    IndexArtifacts artifacts;
    auto corpus_in = open_for_read(dir / "corpus.jsonl");
    artifacts.corpus = std::make_shared<Corpus>(read_corpus(corpus_in));
    auto sparse_in = open_for_read(dir / "sparse.idx");
    artifacts.sparse = std::make_shared<SparseIndex>(SparseIndex::load(sparse_in));
    auto dense_in = open_for_read(dir / "dense.idx");
    artifacts.dense = std::make_shared<DenseIndex>(DenseIndex::load(dense_in));
    return artifacts;
}

IndexArtifacts obtain_indexes(const PipelineConfig& config) {
    if (!config.index_dir.empty()) {
        return load_indexes(config.index_dir);
    }
    return build_indexes(config);
}

Backends make_backends(const PipelineConfig& config, std::size_t index_dim) {
    Backends backends;
    backends.embedder = make_embedder(config, index_dim);

    if (!config.mock_backends.empty()) {
        backends.generator = std::make_shared<ScriptedGenerator>(
            ScriptedGenerator::load_rules(config.mock_backends / "generator.jsonl"));
        backends.verifier = std::make_shared<ScriptedVerifier>(
            ScriptedVerifier::load_rules(config.mock_backends / "verifier.jsonl"));
        return backends;
    }

    if (config.generator_endpoint.empty()) {
        throw ConfigError("no generator configured (generator.endpoint or --mock-backends)");
    }
    const auto transport = make_transport(config);
    const auto retry = make_retry(config);
    auto generator = std::make_shared<ChatCompletionBackend>(
        transport, config.generator_endpoint, config.generator_model,
        config.generator_temperature, retry);
    backends.generator = generator;

    if (config.verifier_kind == "nli_endpoint") {
        if (config.verifier_endpoint.empty()) {
            throw ConfigError("verifier.kind = nli_endpoint requires verifier.endpoint");
        }
        backends.verifier =
            std::make_shared<NliEndpointVerifier>(transport, config.verifier_endpoint, retry);
    } else if (config.verifier_kind == "llm_as_nli") {
        const std::string endpoint = config.verifier_endpoint.empty()
                                         ? config.generator_endpoint
                                         : config.verifier_endpoint;
        const std::string model =
            config.verifier_model.empty() ? config.generator_model : config.verifier_model;
        backends.verifier = std::make_shared<LlmNliVerifier>(
            std::make_shared<ChatCompletionBackend>(transport, endpoint, model, 0.0, retry));
    } else {
        throw ConfigError("verifier.kind = scripted requires --mock-backends");
    }
    return backends;
}

std::shared_ptr<const Pipeline> make_pipeline(const PipelineConfig& config,
                                              const IndexArtifacts& artifacts) {
    const Backends backends = make_backends(config, artifacts.dense ? artifacts.dense->dim() : 0);
    PipelineComponents components{artifacts.corpus, artifacts.sparse,   artifacts.dense,
                                  backends.embedder, backends.generator, backends.verifier};
    return std::make_shared<Pipeline>(std::move(components), config.pipeline_settings());
}

} // namespace reflectrag
