#pragma once

#include "reflectrag/corpus.hpp"
#include "reflectrag/ranked_list.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace reflectrag {

using Embedding = std::vector<double>;

/// Text encoder backend. Returns one vector of length dim() per input, in input order.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<Embedding> embed(std::span<const std::string> texts) const = 0;
};

/// Deterministic signed feature hashing of analyzer tokens, L2-normalised.
/// Offline stand-in for a neural encoder; used with scripted backends.
class HashingEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashingEmbeddingProvider(std::size_t dim);
    std::size_t dim() const override { return dim_; }
    std::vector<Embedding> embed(std::span<const std::string> texts) const override;

private:
    std::size_t dim_;
};

/// Corpus vectors were precomputed; query-time embedding is unavailable.
class PrecomputedOnlyProvider final : public EmbeddingProvider {
public:
    explicit PrecomputedOnlyProvider(std::size_t dim) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    /// Always throws StateError.
    std::vector<Embedding> embed(std::span<const std::string> texts) const override;

private:
    std::size_t dim_;
};

struct EmbeddingRecord {
    std::string id;
    Embedding vector;
};

/// JSONL of {"id": string, "vector": [number, ...]}.
std::vector<EmbeddingRecord> read_embeddings(std::istream& in);
std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path);
void write_embeddings(std::span<const EmbeddingRecord> records, std::ostream& out);

/// Exact dot-product index; row i belongs to corpus position i.
class DenseIndex {
public:
    DenseIndex() = default;

    /// Requires exactly one record per corpus id, all of one length.
    /// Throws InputError naming the first missing, surplus, or duplicate id,
    /// or on a dimension mismatch.
    static DenseIndex build(const Corpus& corpus, std::span<const EmbeddingRecord> records);
    static DenseIndex build(const Corpus& corpus, const EmbeddingProvider& provider,
                            std::size_t batch_size = 64);

    /// Top-k by dot product, ties by ascending passage id. Throws InputError
    /// when the query length differs from dim() on a non-empty index.
    RankedList search(std::span<const double> query, std::size_t k) const;

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    std::span<const double> row(std::size_t position) const;
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    void save(std::ostream& out) const;
    static DenseIndex load(std::istream& in);

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<double> rows_;  // row-major, size() x dim()
};

} // namespace reflectrag
