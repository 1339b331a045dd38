#pragma once

#include "reflectrag/config.hpp"
#include "reflectrag/orchestrator.hpp"

#include <filesystem>
#include <memory>

namespace reflectrag {

/// Corpus plus both indexes, aligned by position.
struct IndexArtifacts {
    std::shared_ptr<const Corpus> corpus;
    std::shared_ptr<const SparseIndex> sparse;
    std::shared_ptr<const DenseIndex> dense;
};

/// Ingests the corpus and builds both indexes. Dense vectors come from the
/// embeddings file when set, otherwise from the configured embedder.
IndexArtifacts build_indexes(const PipelineConfig& config);

/// Index directory layout: corpus.jsonl, sparse.idx, dense.idx, manifest.json.
void save_indexes(const IndexArtifacts& artifacts, const std::filesystem::path& dir);
IndexArtifacts load_indexes(const std::filesystem::path& dir);

/// Loads from config.index_dir when set, else builds from the corpus.
IndexArtifacts obtain_indexes(const PipelineConfig& config);

/// The query embedder implied by the config. `index_dim` fills in an unset dimension.
std::shared_ptr<const EmbeddingProvider> make_embedder(const PipelineConfig& config,
                                                       std::size_t index_dim);

struct Backends {
    std::shared_ptr<const EmbeddingProvider> embedder;
    std::shared_ptr<const GeneratorBackend> generator;
    std::shared_ptr<const VerifierBackend> verifier;
};

/// Scripted backends when config.mock_backends is set, HTTP backends otherwise.
Backends make_backends(const PipelineConfig& config, std::size_t index_dim);

std::shared_ptr<const Pipeline> make_pipeline(const PipelineConfig& config,
                                              const IndexArtifacts& artifacts);

} // namespace reflectrag
