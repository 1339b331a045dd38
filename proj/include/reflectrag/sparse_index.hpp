#pragma once

#include "reflectrag/corpus.hpp"
#include "reflectrag/ranked_list.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace reflectrag {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t position = 0;
    std::uint32_t term_frequency = 0;

    bool operator==(const Posting&) const = default;
};

/// Okapi BM25 over an immutable corpus.
///
/// score(q, d) = sum over unique terms t of q:
///   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
///   idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
class SparseIndex {
public:
    SparseIndex() = default;

    /// Throws ConfigError unless k1 >= 0 and 0 <= b <= 1.
    static SparseIndex build(const Corpus& corpus, Bm25Params params = {});

    double score(std::span<const std::string> query_tokens, std::size_t position) const;

    /// Top-k by score, ties by ascending passage id; zero-score passages are omitted.
    RankedList search(std::span<const std::string> query_tokens, std::size_t k) const;

    std::size_t n_docs() const noexcept { return doc_len_.size(); }
    double avg_doc_len() const noexcept { return avg_doc_len_; }
    std::uint32_t doc_len(std::size_t position) const { return doc_len_.at(position); }
    const Bm25Params& params() const noexcept { return params_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }

    /// Empty span for unknown terms.
    std::span<const Posting> postings(const std::string& term) const;
    double idf(const std::string& term) const;

    /// Private binary format with a magic/version header.
    void save(std::ostream& out) const;
    static SparseIndex load(std::istream& in);

private:
    double term_weight(double idf, std::uint32_t tf, std::size_t position) const;

    Bm25Params params_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    std::vector<std::uint32_t> doc_len_;
    std::vector<std::string> ids_;
    double avg_doc_len_ = 0.0;
};

} // namespace reflectrag
