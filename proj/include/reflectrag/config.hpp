#pragma once

#include "reflectrag/orchestrator.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace reflectrag {

/// Everything a CLI or service run needs. Defaults are the shipped defaults.
///
/// Sources, lowest precedence first: built-in defaults, the config file
/// (--config, else $REFLECTRAG_CONFIG), command-line flags.
struct PipelineConfig {
    std::filesystem::path corpus_path;
    std::filesystem::path embeddings_path;
    std::filesystem::path index_dir;
    /// Directory holding generator.jsonl and verifier.jsonl; replaces all remote backends.
    std::filesystem::path mock_backends;

    // "precomputed" (file vectors, no query embedding), "http", or "hashing".
    std::string embedder_kind = "precomputed";
    std::string embedder_endpoint;
    std::string embedder_model;
    std::size_t embedder_dim = 0;  // 0: take from the embeddings file; hashing uses 64

    std::string generator_endpoint;
    std::string generator_model;
    double generator_temperature = 0.0;
    std::string api_key_env = "REFLECTRAG_API_KEY";

    // "nli_endpoint", "llm_as_nli", or "scripted".
    std::string verifier_kind = "nli_endpoint";
    std::string verifier_endpoint;
    std::string verifier_model;

    std::size_t timeout_ms = 120000;
    int retry_attempts = 3;
    std::size_t retry_backoff_ms = 500;
    std::size_t max_in_flight = 4;

    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    double fusion_k = 60.0;
    std::size_t fusion_k_out = 8;
    std::size_t retrieval_depth = 32;
    double tau = 0.5;
    double theta = 0.7;
    std::size_t max_iters = 3;
    std::size_t context_chars = 12000;

    std::size_t workers = 4;
    std::uint64_t seed = 42;
    std::size_t sample_n = 500;

    /// Throws ConfigError when a value is out of range.
    void validate() const;

    PipelineSettings pipeline_settings() const;
};

/// Applies an INI-style file ([section] then key = value lines) over `config`.
/// Unknown sections or keys are ConfigErrors.
void apply_config_file(PipelineConfig& config, std::istream& in);
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);

/// Pipeline-relevant settings (no paths or credentials), for report snapshots.
nlohmann::json settings_snapshot(const PipelineConfig& config);

} // namespace reflectrag
