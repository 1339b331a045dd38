#pragma once

#include "reflectrag/ranked_list.hpp"

#include <cstddef>
#include <span>

namespace reflectrag {

struct FusionConfig {
    /// Rank offset; must be > 0.
    double k = 60.0;
    /// Number of fused passages handed to the generator.
    std::size_t k_out = 8;
};

/// Reciprocal Rank Fusion: each passage scores the sum over the lists that
/// contain it of 1 / (k + rank), rank 1-based. Output is ordered by fused
/// score desc, best input rank asc, then passage id asc, and truncated to k_out.
///
/// The per-passage sum is taken over ranks in ascending order, so the result
/// does not depend on the order of `lists`.
RankedList rrf_fuse(std::span<const RankedList> lists, const FusionConfig& config);

} // namespace reflectrag
