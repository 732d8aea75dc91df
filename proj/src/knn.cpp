#include "dade/knn.hpp"

#include <algorithm>

#include "dade/error.hpp"

namespace dade {

bool TopKHeap::push(Neighbor n) {
    if (!full()) {
        heap_.push_back(n);
        std::push_heap(heap_.begin(), heap_.end());
        return true;
    }
    if (!(n < heap_.front())) return false;
    std::pop_heap(heap_.begin(), heap_.end());
    heap_.back() = n;
    std::push_heap(heap_.begin(), heap_.end());
    return true;
}

SearchResult TopKHeap::take_sorted() {
    SearchResult res;
    res.truncated = heap_.size() < k_;
    std::sort_heap(heap_.begin(), heap_.end());
    res.neighbors = std::move(heap_);
    heap_.clear();
    return res;
}

SearchResult linear_scan(const VectorSet& data, const float* query, std::uint32_t k,
                         const DcoStrategy& dco, DcoStats* stats) {
    if (k == 0) throw InvalidInput("linear_scan: k must be positive");
    if (data.dim != dco.dim()) throw InvalidInput("linear_scan: strategy dim mismatch");
    TopKHeap heap(k);
    for (std::uint32_t id = 0; id < data.count; ++id) {
        const DcoOutcome out = dco.evaluate(data.row(id), query, heap.threshold(), stats);
        if (!out.pruned) heap.push({out.distance, id});
    }
    return heap.take_sorted();
}

}  // namespace dade
