#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "dade/estimator.hpp"
#include "dade/vector_set.hpp"

namespace dade {

struct Neighbor {
    float distance = 0.0f;
    std::uint32_t id = 0;
};

// Ties break by id so every search result is fully deterministic.
inline bool operator<(const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
}

struct SearchResult {
    std::vector<Neighbor> neighbors;  // ascending (distance, id)
    bool truncated = false;           // fewer than the requested K were found

    std::vector<std::uint32_t> ids() const {
        std::vector<std::uint32_t> out;
        out.reserve(neighbors.size());
        for (const Neighbor& n : neighbors) out.push_back(n.id);
        return out;
    }
};

// Keeps the k smallest neighbors seen so far; threshold() is the pruning
// radius r handed to DCOs: +infinity until the heap fills, then the worst
// kept distance, which can only shrink from there.
class TopKHeap {
public:
    explicit TopKHeap(std::uint32_t k) : k_(k) { heap_.reserve(k); }

    bool full() const { return heap_.size() >= k_; }
    std::size_t size() const { return heap_.size(); }
    float threshold() const {
        return full() ? heap_.front().distance : std::numeric_limits<float>::infinity();
    }
    const Neighbor& worst() const { return heap_.front(); }

    // Returns true when the neighbor was kept.
    bool push(Neighbor n);

    SearchResult take_sorted();

private:
    std::uint32_t k_;
    std::vector<Neighbor> heap_;  // max-heap on (distance, id)
};

// Sequential scan in id order with a K-bounded heap; the DCO threshold is
// the current K-th best distance.
SearchResult linear_scan(const VectorSet& data, const float* query, std::uint32_t k,
                         const DcoStrategy& dco, DcoStats* stats = nullptr);

}  // namespace dade
