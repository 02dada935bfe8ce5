#pragma once

#include <map>
#include <vector>

#include "memfly/dense_index.hpp"
#include "memfly/ids.hpp"

namespace memfly {

/// Reciprocal rank fusion: score(n) = sum over lists containing n of
/// 1 / (k + rank), ranks 1-based. Descending score, ascending id on ties.
/// Only list order matters; incoming scores are ignored.
template <class IdT>
Ranked<IdT> rrf_fuse(const std::vector<Ranked<IdT>>& lists, double k) {
    std::map<IdT, double> score;
    for (const auto& list : lists) {
        for (std::size_t r = 0; r < list.size(); ++r) score[list[r].first] += 1.0 / (k + static_cast<double>(r + 1));
    }
    Ranked<IdT> out(score.begin(), score.end());
    sort_ranked(out);
    return out;
}

} // namespace memfly
