#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace dade::defaults {

inline constexpr std::uint32_t hnsw_m = 16;
inline constexpr std::uint32_t hnsw_ef_construction = 500;
inline constexpr double adsampling_eps0 = 2.1;
inline constexpr double p_s = 0.1;
inline constexpr std::uint32_t delta_d = 32;
inline constexpr std::uint32_t kmeans_max_iters = 25;

// Square root of the cardinality, the usual IVF sizing rule.
inline std::uint32_t ivf_n_clusters(std::uint64_t count) {
    const auto c = static_cast<std::uint32_t>(std::llround(std::sqrt(static_cast<double>(count))));
    return std::max<std::uint32_t>(1, c);
}

// 100k pairs, or every unordered pair when the set is smaller than that.
inline std::uint64_t calibration_pairs(std::uint64_t count) {
    const std::uint64_t all = count * (count - 1) / 2;
    return std::min<std::uint64_t>(100000, all);
}

}  // namespace dade::defaults
