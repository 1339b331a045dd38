#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace reflectrag {

/// Splits text into lowercase ASCII alphanumeric runs. Every other byte,
/// including all bytes of multi-byte UTF-8 sequences, is a separator.
std::vector<std::string> analyze(std::string_view text);

struct Passage {
    std::string id;
    std::optional<std::string> title;
    std::string text;
    /// Filled by Corpus from `text`; any caller-supplied value is replaced.
    std::vector<std::string> tokens;
};

/// Immutable, ordered collection of passages with unique ids.
class Corpus {
public:
    Corpus() = default;

    /// Validates ids (unique, non-empty) and text (non-empty), then tokenizes.
    /// Throws InputError on violation.
    explicit Corpus(std::vector<Passage> passages);

    std::size_t size() const noexcept { return passages_.size(); }
    bool empty() const noexcept { return passages_.empty(); }

    const Passage& operator[](std::size_t position) const { return passages_[position]; }
    std::span<const Passage> passages() const noexcept { return passages_; }

    std::optional<std::size_t> position_of(std::string_view id) const;
    /// Throws InputError when the id is unknown.
    const Passage& at(std::string_view id) const;

private:
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Reads a JSONL corpus: {"id": string, "title": string (optional), "text": string}.
/// Unknown keys are ignored. Errors carry the 1-based line number.
Corpus read_corpus(std::istream& in);
Corpus ingest_corpus(const std::filesystem::path& path);

/// Canonical JSONL form: one compact {"id","title"?,"text"} object per line.
void write_corpus(const Corpus& corpus, std::ostream& out);

} // namespace reflectrag
