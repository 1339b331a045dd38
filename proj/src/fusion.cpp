#include "reflectrag/fusion.hpp"

#include "reflectrag/errors.hpp"

#include <algorithm>
#include <set>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace reflectrag {

std::vector<std::string> RankedList::ids() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back(e.passage_id);
    }
    return out;
}

bool is_well_formed(const RankedList& list) {
    std::set<std::string_view> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (!seen.insert(list[i].passage_id).second) {
            return false;
        }
        if (i > 0 && list[i].score > list[i - 1].score) {
            return false;
        }
    }
    return true;
}

RankedList rrf_fuse(std::span<const RankedList> lists, const FusionConfig& config) {
    if (!(config.k > 0.0)) {
        throw ConfigError("fusion k must be > 0");
    }

    struct Accumulator {
        std::string_view id;
        std::vector<std::size_t> ranks;
    };
    std::vector<Accumulator> passages;
    std::unordered_map<std::string_view, std::size_t> slot;
    for (const RankedList& list : lists) {
        for (std::size_t j = 0; j < list.size(); ++j) {
            const std::string_view id = list[j].passage_id;
            auto [it, inserted] = slot.emplace(id, passages.size());
            if (inserted) {
                passages.push_back({id, {}});
            }
            passages[it->second].ranks.push_back(j + 1);
        }
    }

    struct Fused {
        std::string_view id;
        double score;
        std::size_t best_rank;
    };
    std::vector<Fused> fused;
    fused.reserve(passages.size());
    for (auto& p : passages) {
        std::sort(p.ranks.begin(), p.ranks.end());
        double score = 0.0;
        for (const std::size_t r : p.ranks) {
            score += 1.0 / (config.k + static_cast<double>(r));
        }
        fused.push_back({p.id, score, p.ranks.front()});
    }

    const std::size_t keep = std::min(config.k_out, fused.size());
    std::partial_sort(fused.begin(), fused.begin() + static_cast<std::ptrdiff_t>(keep), fused.end(),
                      [](const Fused& a, const Fused& b) {
                          if (a.score != b.score) {
                              return a.score > b.score;
                          }
                          if (a.best_rank != b.best_rank) {
                              return a.best_rank < b.best_rank;
                          }
                          return a.id < b.id;
                      });

    RankedList out;
    out.entries.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        out.entries.push_back({std::string(fused[i].id), fused[i].score});
    }
    return out;
}

} // namespace reflectrag
