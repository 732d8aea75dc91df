#pragma once

#include <algorithm>
#include <cstdint>

namespace dade {

// Candidate vector whose components may live in two contiguous blocks.
// Split index storage keeps components [0, split) apart from [split, dim);
// plain contiguous storage is the degenerate case split == dim.
struct SplitView {
    const float* head = nullptr;
    const float* tail = nullptr;
    std::uint32_t split = 0;

    static SplitView contiguous(const float* v, std::uint32_t dim) { return {v, nullptr, dim}; }
};

// Adds (o_k - q_k)^2 for k in [lo, hi) onto acc, element by element in index
// order. Resuming from a previous range continues the exact rounding
// sequence of a single full pass, which is what makes the adaptive scan
// bit-identical to a straight full-dimension scan when nothing is pruned.
inline void accumulate_sqdist(float& acc, const SplitView& o, const float* q, std::uint32_t lo,
                              std::uint32_t hi) {
    const std::uint32_t mid = std::min(hi, o.split);
    for (std::uint32_t k = lo; k < mid; ++k) {
        const float d = o.head[k] - q[k];
        acc += d * d;
    }
    for (std::uint32_t k = std::max(lo, o.split); k < hi; ++k) {
        const float d = o.tail[k - o.split] - q[k];
        acc += d * d;
    }
}

inline float l2_sq(const float* a, const float* b, std::uint32_t dim) {
    float acc = 0.0f;
    for (std::uint32_t k = 0; k < dim; ++k) {
        const float d = a[k] - b[k];
        acc += d * d;
    }
    return acc;
}

// 64-bit accumulation, used wherever exactness matters more than speed
// (ground truth, covariance checks).
inline double l2_sq_double(const float* a, const float* b, std::uint32_t dim) {
    double acc = 0.0;
    for (std::uint32_t k = 0; k < dim; ++k) {
        const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        acc += d * d;
    }
    return acc;
}

}  // namespace dade
