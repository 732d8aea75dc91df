#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dade/knn.hpp"
#include "dade/vector_set.hpp"

namespace dade {

// Hierarchical small-world graph. Construction uses exact distances; the
// query-time beam search runs every candidate through a pluggable DCO.
//
// Two threshold regimes at search time:
//  - coupled: the DCO threshold is the worst distance in the ef-bounded
//    result set, and rejected candidates vanish from the traversal.
//  - decoupled: the DCO threshold is the current K-th best exact distance
//    (a tighter radius since K <= ef), while the ef-bounded steering set
//    keeps rejected candidates ordered by their estimated distances so the
//    walk can still pass through them.
class HnswIndex {
public:
    static HnswIndex build(const VectorSet& data, std::uint32_t m, std::uint32_t ef_construction,
                           std::uint64_t seed);

    // Requires 1 <= k <= ef.
    SearchResult search(const float* query, std::uint32_t k, std::uint32_t ef,
                        const DcoStrategy& dco, bool decoupled, DcoStats* stats = nullptr) const;

    std::uint32_t dim() const { return dim_; }
    std::uint32_t count() const { return count_; }
    std::uint32_t m() const { return m_; }
    std::uint32_t ef_construction() const { return ef_construction_; }
    std::uint32_t entry_point() const { return entry_; }
    std::int32_t max_level() const { return max_level_; }
    std::int32_t level_of(std::uint32_t id) const { return levels_[id]; }
    const std::vector<std::uint32_t>& neighbors(std::int32_t level, std::uint32_t id) const {
        return layers_[static_cast<std::size_t>(level)][id];
    }
    const float* vector_data(std::uint32_t id) const {
        return vectors_.data() + static_cast<std::size_t>(id) * dim_;
    }

    void save(const std::filesystem::path& path) const;
    static HnswIndex load(const std::filesystem::path& path);

private:
    std::uint32_t dim_ = 0;
    std::uint32_t count_ = 0;
    std::uint32_t m_ = 0;
    std::uint32_t ef_construction_ = 0;
    std::uint32_t entry_ = 0;
    std::int32_t max_level_ = 0;
    std::vector<std::int32_t> levels_;
    // layers_[level][id] -> neighbor ids; degree capped at 2m on level 0, m above.
    std::vector<std::vector<std::vector<std::uint32_t>>> layers_;
    std::vector<float> vectors_;

    std::uint32_t degree_cap(std::int32_t level) const { return level == 0 ? 2 * m_ : m_; }
    std::uint32_t greedy_descend(const float* q, std::uint32_t ep, std::int32_t from,
                                 std::int32_t to) const;
    std::vector<Neighbor> search_layer_exact(const float* q, std::uint32_t ep, std::uint32_t ef,
                                             std::int32_t level) const;
    std::vector<std::uint32_t> select_neighbors(const float* q, const std::vector<Neighbor>& cands,
                                                std::uint32_t cap) const;
    void insert(std::uint32_t id);
};

}  // namespace dade
