#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dade/knn.hpp"
#include "dade/vector_set.hpp"

namespace dade {

struct KmeansResult {
    std::vector<float> centroids;            // n_clusters * dim
    std::vector<std::uint32_t> assignments;  // one per input vector
    std::vector<double> distortion_history;  // sum of squared distances, per iteration
    std::uint32_t iterations = 0;
};

// k-means++ seeding then Lloyd's iterations. Stops when assignments are
// stable or max_iters is hit. Empty clusters are re-seeded from the largest
// cluster's farthest member.
KmeansResult kmeans(const VectorSet& data, std::uint32_t n_clusters, std::uint32_t max_iters,
                    std::uint64_t seed);

enum class IvfLayout : std::uint8_t { contiguous = 0, split = 1 };

// Inverted file over a coarse k-means quantizer. Posting lists hold vector
// copies; the split layout stores each cluster's leading split_prefix_dims
// components as one block so the first scan checkpoint reads memory
// sequentially across candidates.
class IvfIndex {
public:
    static IvfIndex build(const VectorSet& data, std::uint32_t n_clusters, IvfLayout layout,
                          std::uint32_t split_prefix_dims, std::uint32_t kmeans_max_iters,
                          std::uint64_t seed);

    // Scans the n_probe clusters whose centroids are nearest to the query,
    // in posting-list order, pruning with the supplied DCO.
    SearchResult search(const float* query, std::uint32_t k, std::uint32_t n_probe,
                        const DcoStrategy& dco, DcoStats* stats = nullptr) const;

    std::uint32_t dim() const { return dim_; }
    std::uint32_t count() const { return count_; }
    std::uint32_t n_clusters() const { return n_clusters_; }
    IvfLayout layout() const { return layout_; }
    std::uint32_t split_prefix_dims() const { return split_; }
    std::uint32_t list_size(std::uint32_t cluster) const {
        return offsets_[cluster + 1] - offsets_[cluster];
    }
    const std::vector<float>& centroids() const { return centroids_; }

    // View of one stored vector, valid for any layout.
    SplitView candidate(std::uint32_t cluster, std::uint32_t pos) const;
    std::uint32_t candidate_id(std::uint32_t cluster, std::uint32_t pos) const {
        return ids_[offsets_[cluster] + pos];
    }

    void save(const std::filesystem::path& path) const;
    static IvfIndex load(const std::filesystem::path& path);

private:
    std::uint32_t dim_ = 0;
    std::uint32_t count_ = 0;
    std::uint32_t n_clusters_ = 0;
    IvfLayout layout_ = IvfLayout::contiguous;
    std::uint32_t split_ = 0;  // equals dim_ for the contiguous layout
    std::vector<float> centroids_;
    std::vector<std::uint32_t> offsets_;  // n_clusters + 1 prefix sums
    std::vector<std::uint32_t> ids_;      // posting lists, ascending within a cluster
    std::vector<float> storage_;
};

}  // namespace dade
