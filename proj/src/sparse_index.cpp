#include "reflectrag/sparse_index.hpp"

#include "binary_io.hpp"
#include "reflectrag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace reflectrag {

namespace {

constexpr std::string_view kMagic = "RRSPARSE";
constexpr std::uint32_t kFormatVersion = 1;

// Unique query terms in lexicographic order; fixes the summation order so that
// score() and search() produce bit-identical values.
std::set<std::string, std::less<>> unique_terms(std::span<const std::string> tokens) {
    return {tokens.begin(), tokens.end()};
}

} // namespace

SparseIndex SparseIndex::build(const Corpus& corpus, Bm25Params params) {
    if (!(params.k1 >= 0.0) || !std::isfinite(params.k1)) {
        throw ConfigError("bm25 k1 must be >= 0, got " + std::to_string(params.k1));
    }
    if (!(params.b >= 0.0 && params.b <= 1.0)) {
        throw ConfigError("bm25 b must be in [0, 1], got " + std::to_string(params.b));
    }
    if (corpus.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw InputError("corpus too large for the sparse index");
    }

    SparseIndex index;
    index.params_ = params;
    index.doc_len_.reserve(corpus.size());
    index.ids_.reserve(corpus.size());

    double total_len = 0.0;
    for (std::size_t pos = 0; pos < corpus.size(); ++pos) {
        const Passage& passage = corpus[pos];
        index.ids_.push_back(passage.id);
        index.doc_len_.push_back(static_cast<std::uint32_t>(passage.tokens.size()));
        total_len += static_cast<double>(passage.tokens.size());

        std::map<std::string_view, std::uint32_t> counts;
        for (const auto& token : passage.tokens) {
            ++counts[token];
        }
        // Positions are visited in increasing order, so every postings list stays sorted.
        for (const auto& [term, tf] : counts) {
            auto it = index.postings_.find(term);
            if (it == index.postings_.end()) {
                it = index.postings_.emplace(std::string(term), std::vector<Posting>{}).first;
            }
            it->second.push_back({static_cast<std::uint32_t>(pos), tf});
        }
    }
    index.avg_doc_len_ = corpus.empty() ? 0.0 : total_len / static_cast<double>(corpus.size());
    return index;
}

std::span<const Posting> SparseIndex::postings(const std::string& term) const {
    const auto it = postings_.find(term);
    if (it == postings_.end()) {
        return {};
    }
    return it->second;
}

double SparseIndex::idf(const std::string& term) const {
    const double n = static_cast<double>(n_docs());
    const double df = static_cast<double>(postings(term).size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double SparseIndex::term_weight(double idf, std::uint32_t tf, std::size_t position) const {
    const double f = static_cast<double>(tf);
    const double length_ratio = static_cast<double>(doc_len_[position]) / avg_doc_len_;
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * length_ratio);
    return idf * f * (params_.k1 + 1.0) / (f + norm);
}

double SparseIndex::score(std::span<const std::string> query_tokens, std::size_t position) const {
    if (position >= n_docs()) {
        throw InputError("passage position " + std::to_string(position) + " out of range");
    }
    double total = 0.0;
    for (const auto& term : unique_terms(query_tokens)) {
        const auto list = postings(term);
        const auto it = std::lower_bound(
            list.begin(), list.end(), position,
            [](const Posting& p, std::size_t pos) { return p.position < pos; });
        if (it == list.end() || it->position != position) {
            continue;
        }
        total += term_weight(idf(term), it->term_frequency, position);
    }
    return total;
}

RankedList SparseIndex::search(std::span<const std::string> query_tokens, std::size_t k) const {
    RankedList result;
    if (k == 0 || n_docs() == 0) {
        return result;
    }

    std::vector<double> scores(n_docs(), 0.0);
    std::vector<bool> touched(n_docs(), false);
    for (const auto& term : unique_terms(query_tokens)) {
        const auto list = postings(term);
        if (list.empty()) {
            continue;
        }
        const double term_idf = idf(term);
        for (const Posting& p : list) {
            scores[p.position] += term_weight(term_idf, p.term_frequency, p.position);
            touched[p.position] = true;
        }
    }

    std::vector<RankedEntry> candidates;
    for (std::size_t pos = 0; pos < n_docs(); ++pos) {
        if (touched[pos] && scores[pos] > 0.0) {
            candidates.push_back({ids_[pos], scores[pos]});
        }
    }
    const std::size_t keep = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), ranks_before);
    candidates.resize(keep);
    result.entries = std::move(candidates);
    return result;
}

void SparseIndex::save(std::ostream& out) const {
    detail::write_header(out, kMagic, kFormatVersion);
    detail::write_pod(out, params_.k1);
    detail::write_pod(out, params_.b);
    detail::write_pod<std::uint64_t>(out, ids_.size());
    for (std::size_t pos = 0; pos < ids_.size(); ++pos) {
        detail::write_string(out, ids_[pos]);
        detail::write_pod(out, doc_len_[pos]);
    }
    detail::write_pod<std::uint64_t>(out, postings_.size());
    for (const auto& [term, list] : postings_) {
        detail::write_string(out, term);
        detail::write_pod<std::uint64_t>(out, list.size());
        for (const Posting& p : list) {
            detail::write_pod(out, p.position);
            detail::write_pod(out, p.term_frequency);
        }
    }
    if (!out) {
        throw Error("failed writing sparse index");
    }
}

SparseIndex SparseIndex::load(std::istream& in) {
    detail::expect_header(in, kMagic, kFormatVersion);
    SparseIndex index;
    index.params_.k1 = detail::read_pod<double>(in);
    index.params_.b = detail::read_pod<double>(in);
    const auto n = detail::read_pod<std::uint64_t>(in);
    double total_len = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        index.ids_.push_back(detail::read_string(in));
        index.doc_len_.push_back(detail::read_pod<std::uint32_t>(in));
        total_len += index.doc_len_.back();
    }
    index.avg_doc_len_ = n == 0 ? 0.0 : total_len / static_cast<double>(n);
    const auto n_terms = detail::read_pod<std::uint64_t>(in);
    for (std::uint64_t t = 0; t < n_terms; ++t) {
        std::string term = detail::read_string(in);
        const auto n_postings = detail::read_pod<std::uint64_t>(in);
        if (n_postings > n) {
            throw InputError("corrupt sparse index: postings longer than corpus");
        }
        std::vector<Posting> list;
        list.reserve(n_postings);
        for (std::uint64_t j = 0; j < n_postings; ++j) {
            Posting p;
            p.position = detail::read_pod<std::uint32_t>(in);
            p.term_frequency = detail::read_pod<std::uint32_t>(in);
            if (p.position >= n || (!list.empty() && p.position <= list.back().position)) {
                throw InputError("corrupt sparse index: postings out of order");
            }
            list.push_back(p);
        }
        index.postings_.emplace(std::move(term), std::move(list));
    }
    return index;
}

} // namespace reflectrag
