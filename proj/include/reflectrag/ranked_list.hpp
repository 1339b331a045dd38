#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace reflectrag {

struct RankedEntry {
    std::string passage_id;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

/// Scored passage references in rank order; entry j has 1-based rank j + 1.
/// Invariants: no duplicate ids, scores non-increasing.
struct RankedList {
    std::vector<RankedEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }
    auto begin() const noexcept { return entries.begin(); }
    auto end() const noexcept { return entries.end(); }
    const RankedEntry& operator[](std::size_t i) const { return entries[i]; }

    std::vector<std::string> ids() const;

    bool operator==(const RankedList&) const = default;
};

/// True when the list has unique ids and non-increasing scores.
bool is_well_formed(const RankedList& list);

/// Orders (score desc, id asc); used by every retriever for deterministic output.
inline bool ranks_before(const RankedEntry& lhs, const RankedEntry& rhs) {
    if (lhs.score != rhs.score) {
        return lhs.score > rhs.score;
    }
    return lhs.passage_id < rhs.passage_id;
}

} // namespace reflectrag
