#include "reflectrag/dense_index.hpp"

#include "binary_io.hpp"
#include "reflectrag/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace reflectrag {

namespace {

constexpr std::string_view kMagic = "RRDENSE1";
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) {
        throw ConfigError("embedding dimension must be positive");
    }
}

std::vector<Embedding> HashingEmbeddingProvider::embed(std::span<const std::string> texts) const {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        Embedding v(dim_, 0.0);
        for (const auto& token : analyze(text)) {
            const std::uint64_t h = fnv1a64(token);
            v[h % dim_] += (h >> 63) != 0 ? -1.0 : 1.0;
        }
        double norm = 0.0;
        for (const double x : v) {
            norm += x * x;
        }
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) {
                x /= norm;
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<Embedding> PrecomputedOnlyProvider::embed(std::span<const std::string>) const {
    throw StateError(
        "query embedding unavailable: the dense index uses precomputed vectors only; "
        "configure an embedding endpoint to answer questions");
}

std::vector<EmbeddingRecord> read_embeddings(std::istream& in) {
    std::vector<EmbeddingRecord> records;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(std::string("malformed JSON: ") + e.what(), line_number);
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("vector") ||
            !j["vector"].is_array()) {
            throw InputError("expected {\"id\": string, \"vector\": [number, ...]}", line_number);
        }
        EmbeddingRecord record;
        record.id = j["id"].get<std::string>();
        record.vector.reserve(j["vector"].size());
        for (const auto& x : j["vector"]) {
            if (!x.is_number()) {
                throw InputError("non-numeric vector component for id \"" + record.id + "\"",
                                 line_number);
            }
            record.vector.push_back(x.get<double>());
        }
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<EmbeddingRecord> load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open embeddings file " + path.string());
    }
    return read_embeddings(in);
}

void write_embeddings(std::span<const EmbeddingRecord> records, std::ostream& out) {
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["vector"] = r.vector;
        out << j.dump() << '\n';
    }
}

DenseIndex DenseIndex::build(const Corpus& corpus, std::span<const EmbeddingRecord> records) {
    std::unordered_map<std::string_view, const EmbeddingRecord*> by_id;
    std::size_t dim = 0;
    for (const auto& record : records) {
        if (record.vector.empty()) {
            throw InputError("empty vector for id \"" + record.id + "\"");
        }
        if (dim == 0) {
            dim = record.vector.size();
        } else if (record.vector.size() != dim) {
            throw InputError("dimension mismatch: id \"" + record.id + "\" has length " +
                             std::to_string(record.vector.size()) + ", expected " +
                             std::to_string(dim));
        }
        if (!corpus.position_of(record.id)) {
            throw InputError("surplus embedding for id \"" + record.id + "\" not in corpus");
        }
        if (!by_id.emplace(record.id, &record).second) {
            throw InputError("duplicate embedding for id \"" + record.id + "\"");
        }
    }

    DenseIndex index;
    index.dim_ = dim;
    index.ids_.reserve(corpus.size());
    index.rows_.reserve(corpus.size() * dim);
    for (const Passage& passage : corpus.passages()) {
        const auto it = by_id.find(passage.id);
        if (it == by_id.end()) {
            throw InputError("missing embedding for id \"" + passage.id + "\"");
        }
        index.ids_.push_back(passage.id);
        index.rows_.insert(index.rows_.end(), it->second->vector.begin(), it->second->vector.end());
    }
    return index;
}

DenseIndex DenseIndex::build(const Corpus& corpus, const EmbeddingProvider& provider,
                             std::size_t batch_size) {
    batch_size = std::max<std::size_t>(batch_size, 1);
    std::vector<EmbeddingRecord> records;
    records.reserve(corpus.size());
    std::vector<std::string> batch;
    for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
        const std::size_t stop = std::min(corpus.size(), start + batch_size);
        batch.clear();
        for (std::size_t pos = start; pos < stop; ++pos) {
            batch.push_back(corpus[pos].text);
        }
        auto vectors = provider.embed(batch);
        if (vectors.size() != batch.size()) {
            throw BackendError("embedding provider returned " + std::to_string(vectors.size()) +
                               " vectors for " + std::to_string(batch.size()) + " inputs");
        }
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            records.push_back({corpus[start + i].id, std::move(vectors[i])});
        }
    }
    return build(corpus, records);
}

std::span<const double> DenseIndex::row(std::size_t position) const {
    if (position >= size()) {
        throw InputError("row " + std::to_string(position) + " out of range");
    }
    return std::span<const double>(rows_).subspan(position * dim_, dim_);
}

RankedList DenseIndex::search(std::span<const double> query, std::size_t k) const {
    RankedList result;
    if (size() == 0) {
        return result;
    }
    if (query.size() != dim_) {
        throw InputError("query dimension " + std::to_string(query.size()) +
                         " does not match index dimension " + std::to_string(dim_));
    }
    if (k == 0) {
        return result;
    }

    std::vector<RankedEntry> scored;
    scored.reserve(size());
    for (std::size_t pos = 0; pos < size(); ++pos) {
        const double* r = rows_.data() + pos * dim_;
        double dot = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            dot += r[j] * query[j];
        }
        scored.push_back({ids_[pos], dot});
    }
    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), ranks_before);
    scored.resize(keep);
    result.entries = std::move(scored);
    return result;
}

void DenseIndex::save(std::ostream& out) const {
    detail::write_header(out, kMagic, kFormatVersion);
    detail::write_pod<std::uint64_t>(out, dim_);
    detail::write_pod<std::uint64_t>(out, ids_.size());
    for (const auto& id : ids_) {
        detail::write_string(out, id);
    }
    out.write(reinterpret_cast<const char*>(rows_.data()),
              static_cast<std::streamsize>(rows_.size() * sizeof(double)));
    if (!out) {
        throw Error("failed writing dense index");
    }
}

DenseIndex DenseIndex::load(std::istream& in) {
    detail::expect_header(in, kMagic, kFormatVersion);
    DenseIndex index;
    index.dim_ = detail::read_pod<std::uint64_t>(in);
    const auto n = detail::read_pod<std::uint64_t>(in);
    if (index.dim_ > (1u << 20) || n > (std::uint64_t{1} << 32)) {
        throw InputError("corrupt dense index header");
    }
    for (std::uint64_t i = 0; i < n; ++i) {
        index.ids_.push_back(detail::read_string(in));
    }
    index.rows_.resize(n * index.dim_);
    if (!index.rows_.empty() &&
        !in.read(reinterpret_cast<char*>(index.rows_.data()),
                 static_cast<std::streamsize>(index.rows_.size() * sizeof(double)))) {
        throw InputError("truncated dense index");
    }
    return index;
}

} // namespace reflectrag
