#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "memfly/config.hpp"
#include "memfly/error.hpp"
#include "memfly/vector_math.hpp"

namespace memfly {

template <class IdT>
using Ranked = std::vector<std::pair<IdT, double>>;

/// Orders by descending score, then ascending id.
template <class IdT>
void sort_ranked(Ranked<IdT>& r) {
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
}

// Top-k cosine index over unit vectors. Exhaustive scan is the reference
// path; above `approx_threshold` entries (or when forced) candidates come from
// random-hyperplane LSH buckets with single-bit multi-probe, then get rescored
// exactly. Buckets are maintained on every write so reads stay const.
template <class IdT>
class DenseIndex {
public:
    static constexpr int kTables = 8;
    static constexpr int kBits = 10;

    DenseIndex() = default;
    DenseIndex(std::size_t dim, IndexMode mode, std::size_t approx_threshold, std::uint64_t seed = 0x5eed)
        : dim_(dim), mode_(mode), approx_threshold_(approx_threshold) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss;
        planes_.resize(static_cast<std::size_t>(kTables) * kBits * dim_);
        for (double& x : planes_) x = gauss(rng);
        buckets_.resize(kTables);
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool contains(IdT id) const { return pos_.contains(id); }
    const std::vector<IdT>& ids() const noexcept { return ids_; }

    std::span<const double> vector_of(IdT id) const {
        return {data_.data() + pos_.at(id) * dim_, dim_};
    }

    void upsert(IdT id, std::span<const double> v) {
        check_dim(v.size());
        if (auto it = pos_.find(id); it != pos_.end()) {
            unbucket(id, it->second);
            std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
            bucket(id, it->second);
            return;
        }
        const std::size_t row = ids_.size();
        ids_.push_back(id);
        data_.insert(data_.end(), v.begin(), v.end());
        pos_.emplace(id, row);
        bucket(id, row);
    }

    void erase(IdT id) {
        auto it = pos_.find(id);
        if (it == pos_.end()) return;
        const std::size_t row = it->second;
        const std::size_t last = ids_.size() - 1;
        unbucket(id, row);
        if (row != last) {
            const IdT moved = ids_[last];
            std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(last * dim_), dim_,
                        data_.begin() + static_cast<std::ptrdiff_t>(row * dim_));
            ids_[row] = moved;
            pos_[moved] = row;
        }
        ids_.pop_back();
        data_.resize(ids_.size() * dim_);
        pos_.erase(it);
    }

    void clear() {
        ids_.clear();
        data_.clear();
        pos_.clear();
        for (auto& b : buckets_) b.clear();
    }

    bool uses_approximate() const noexcept {
        return mode_ == IndexMode::Approximate ||
               (mode_ == IndexMode::Auto && ids_.size() > approx_threshold_);
    }

    Ranked<IdT> search(std::span<const double> query, std::size_t k) const {
        check_dim(query.size());
        if (k == 0 || ids_.empty()) return {};
        if (uses_approximate()) {
            auto rows = probe(query);
            if (rows.size() >= k) return rank_rows(query, rows, k);
        }
        std::vector<std::size_t> all(ids_.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return rank_rows(query, all, k);
    }

    Ranked<IdT> search_exact(std::span<const double> query, std::size_t k) const {
        check_dim(query.size());
        std::vector<std::size_t> all(ids_.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return rank_rows(query, all, k);
    }

private:
    void check_dim(std::size_t n) const {
        if (n != dim_) {
            throw Error(ErrorCode::DimensionMismatch,
                        "expected dimension " + std::to_string(dim_) + ", got " + std::to_string(n));
        }
    }

    std::uint32_t signature(std::span<const double> v, int table) const {
        std::uint32_t sig = 0;
        for (int b = 0; b < kBits; ++b) {
            const double* plane = planes_.data() + (static_cast<std::size_t>(table) * kBits + b) * dim_;
            double s = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) s += plane[i] * v[i];
            if (s >= 0.0) sig |= (1u << b);
        }
        return sig;
    }

    void bucket(IdT id, std::size_t row) {
        std::span<const double> v{data_.data() + row * dim_, dim_};
        for (int t = 0; t < kTables; ++t) buckets_[t][signature(v, t)].push_back(id);
    }

    void unbucket(IdT id, std::size_t row) {
        std::span<const double> v{data_.data() + row * dim_, dim_};
        for (int t = 0; t < kTables; ++t) {
            auto it = buckets_[t].find(signature(v, t));
            if (it == buckets_[t].end()) continue;
            std::erase(it->second, id);
            if (it->second.empty()) buckets_[t].erase(it);
        }
    }

    std::vector<std::size_t> probe(std::span<const double> query) const {
        std::unordered_set<std::size_t> rows;
        for (int t = 0; t < kTables; ++t) {
            const std::uint32_t sig = signature(query, t);
            auto take = [&](std::uint32_t s) {
                if (auto it = buckets_[t].find(s); it != buckets_[t].end()) {
                    for (IdT id : it->second) rows.insert(pos_.at(id));
                }
            };
            take(sig);
            for (int b = 0; b < kBits; ++b) take(sig ^ (1u << b));
        }
        return {rows.begin(), rows.end()};
    }

    Ranked<IdT> rank_rows(std::span<const double> query, const std::vector<std::size_t>& rows,
                          std::size_t k) const {
        Ranked<IdT> out;
        out.reserve(rows.size());
        for (std::size_t row : rows) {
            std::span<const double> v{data_.data() + row * dim_, dim_};
            out.emplace_back(ids_[row], dot(query, v));
        }
        const std::size_t keep = std::min(k, out.size());
        auto cmp = [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        };
        std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), cmp);
        out.resize(keep);
        return out;
    }

    std::size_t dim_ = 0;
    IndexMode mode_ = IndexMode::Exact;
    std::size_t approx_threshold_ = 0;
    std::vector<double> planes_;
    std::vector<IdT> ids_;
    std::vector<double> data_;
    std::unordered_map<IdT, std::size_t> pos_;
    std::vector<std::unordered_map<std::uint32_t, std::vector<IdT>>> buckets_;
};

} // namespace memfly
