#include "dade/ivf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>

#include "dade/detail/binary_io.hpp"
#include "dade/distance.hpp"
#include "dade/error.hpp"
#include "dade/rng.hpp"

namespace dade {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'V', 'F'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

KmeansResult kmeans(const VectorSet& data, std::uint32_t n_clusters, std::uint32_t max_iters,
                    std::uint64_t seed) {
    data.validate();
    if (n_clusters == 0 || n_clusters > data.count)
        throw InvalidInput("kmeans: n_clusters must be in [1, count], got " +
                           std::to_string(n_clusters));
    if (max_iters == 0) throw InvalidInput("kmeans: max_iters must be positive");

    const std::uint32_t d = data.dim;
    std::mt19937_64 gen(seed);

    KmeansResult res;
    res.centroids.resize(static_cast<std::size_t>(n_clusters) * d);

    // k-means++ seeding: squared-distance-weighted picks.
    std::vector<double> dist2(data.count, std::numeric_limits<double>::infinity());
    {
        const auto first = static_cast<std::uint32_t>(rng::bounded(gen, data.count));
        std::memcpy(res.centroids.data(), data.row(first), sizeof(float) * d);
        for (std::uint32_t c = 1; c < n_clusters; ++c) {
            const float* last = res.centroids.data() + static_cast<std::size_t>(c - 1) * d;
            double total = 0.0;
            for (std::uint32_t i = 0; i < data.count; ++i) {
                dist2[i] = std::min(dist2[i], l2_sq_double(data.row(i), last, d));
                total += dist2[i];
            }
            std::uint32_t pick = 0;
            if (total > 0.0) {
                const double target = rng::uniform01(gen) * total;
                double run = 0.0;
                pick = data.count - 1;
                for (std::uint32_t i = 0; i < data.count; ++i) {
                    run += dist2[i];
                    if (run > target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::uint32_t>(rng::bounded(gen, data.count));
            }
            std::memcpy(res.centroids.data() + static_cast<std::size_t>(c) * d, data.row(pick),
                        sizeof(float) * d);
        }
    }

    res.assignments.assign(data.count, 0);
    std::vector<double> sums(static_cast<std::size_t>(n_clusters) * d);
    std::vector<std::uint32_t> counts(n_clusters);

    for (std::uint32_t iter = 1; iter <= max_iters; ++iter) {
        bool changed = false;
        for (std::uint32_t i = 0; i < data.count; ++i) {
            const float* v = data.row(i);
            std::uint32_t best = 0;
            float best_d2 = l2_sq(v, res.centroids.data(), d);
            for (std::uint32_t c = 1; c < n_clusters; ++c) {
                const float d2 = l2_sq(v, res.centroids.data() + static_cast<std::size_t>(c) * d, d);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = c;
                }
            }
            if (res.assignments[i] != best) {
                res.assignments[i] = best;
                changed = true;
            }
        }
        res.iterations = iter;
        if (!changed && iter > 1) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::uint32_t i = 0; i < data.count; ++i) {
            const float* v = data.row(i);
            double* s = sums.data() + static_cast<std::size_t>(res.assignments[i]) * d;
            for (std::uint32_t k = 0; k < d; ++k) s[k] += v[k];
            ++counts[res.assignments[i]];
        }
        for (std::uint32_t c = 0; c < n_clusters; ++c) {
            if (counts[c] == 0) continue;
            float* cen = res.centroids.data() + static_cast<std::size_t>(c) * d;
            const double* s = sums.data() + static_cast<std::size_t>(c) * d;
            for (std::uint32_t k = 0; k < d; ++k) cen[k] = static_cast<float>(s[k] / counts[c]);
        }

        // Re-seed empties from the largest cluster's farthest member.
        for (std::uint32_t c = 0; c < n_clusters; ++c) {
            if (counts[c] != 0) continue;
            std::uint32_t largest = 0;
            for (std::uint32_t c2 = 1; c2 < n_clusters; ++c2)
                if (counts[c2] > counts[largest]) largest = c2;
            if (counts[largest] == 0) break;
            const float* cen = res.centroids.data() + static_cast<std::size_t>(largest) * d;
            std::uint32_t far_id = 0;
            double far_d2 = -1.0;
            for (std::uint32_t i = 0; i < data.count; ++i) {
                if (res.assignments[i] != largest) continue;
                const double d2 = l2_sq_double(data.row(i), cen, d);
                if (d2 > far_d2) {
                    far_d2 = d2;
                    far_id = i;
                }
            }
            std::memcpy(res.centroids.data() + static_cast<std::size_t>(c) * d, data.row(far_id),
                        sizeof(float) * d);
            res.assignments[far_id] = c;
            --counts[largest];
            ++counts[c];
        }

        double distortion = 0.0;
        for (std::uint32_t i = 0; i < data.count; ++i)
            distortion += l2_sq_double(
                data.row(i),
                res.centroids.data() + static_cast<std::size_t>(res.assignments[i]) * d, d);
        res.distortion_history.push_back(distortion);
    }
    return res;
}

IvfIndex IvfIndex::build(const VectorSet& data, std::uint32_t n_clusters, IvfLayout layout,
                         std::uint32_t split_prefix_dims, std::uint32_t kmeans_max_iters,
                         std::uint64_t seed) {
    data.validate();
    if (layout == IvfLayout::split &&
        (split_prefix_dims == 0 || split_prefix_dims > data.dim))
        throw InvalidInput("IvfIndex: split_prefix_dims must be in [1, dim]");

    KmeansResult km = kmeans(data, n_clusters, kmeans_max_iters, seed);

    IvfIndex idx;
    idx.dim_ = data.dim;
    idx.count_ = data.count;
    idx.n_clusters_ = n_clusters;
    idx.layout_ = layout;
    idx.split_ = layout == IvfLayout::split ? split_prefix_dims : data.dim;
    idx.centroids_ = std::move(km.centroids);

    idx.offsets_.assign(n_clusters + 1, 0);
    for (std::uint32_t i = 0; i < data.count; ++i) ++idx.offsets_[km.assignments[i] + 1];
    for (std::uint32_t c = 0; c < n_clusters; ++c) idx.offsets_[c + 1] += idx.offsets_[c];

    idx.ids_.resize(data.count);
    {
        std::vector<std::uint32_t> cursor(idx.offsets_.begin(), idx.offsets_.end() - 1);
        for (std::uint32_t i = 0; i < data.count; ++i) idx.ids_[cursor[km.assignments[i]]++] = i;
    }

    idx.storage_.resize(static_cast<std::size_t>(data.count) * data.dim);
    for (std::uint32_t c = 0; c < n_clusters; ++c) {
        const std::uint32_t begin = idx.offsets_[c];
        const std::uint32_t len = idx.offsets_[c + 1] - begin;
        float* base = idx.storage_.data() + static_cast<std::size_t>(begin) * data.dim;
        for (std::uint32_t pos = 0; pos < len; ++pos) {
            const float* v = data.row(idx.ids_[begin + pos]);
            if (layout == IvfLayout::contiguous) {
                std::memcpy(base + static_cast<std::size_t>(pos) * data.dim, v,
                            sizeof(float) * data.dim);
            } else {
                const std::uint32_t s = idx.split_;
                std::memcpy(base + static_cast<std::size_t>(pos) * s, v, sizeof(float) * s);
                std::memcpy(base + static_cast<std::size_t>(len) * s +
                                static_cast<std::size_t>(pos) * (data.dim - s),
                            v + s, sizeof(float) * (data.dim - s));
            }
        }
    }
    return idx;
}

SplitView IvfIndex::candidate(std::uint32_t cluster, std::uint32_t pos) const {
    const std::uint32_t begin = offsets_[cluster];
    const std::uint32_t len = offsets_[cluster + 1] - begin;
    const float* base = storage_.data() + static_cast<std::size_t>(begin) * dim_;
    if (layout_ == IvfLayout::contiguous)
        return SplitView::contiguous(base + static_cast<std::size_t>(pos) * dim_, dim_);
    return {base + static_cast<std::size_t>(pos) * split_,
            base + static_cast<std::size_t>(len) * split_ +
                static_cast<std::size_t>(pos) * (dim_ - split_),
            split_};
}

SearchResult IvfIndex::search(const float* query, std::uint32_t k, std::uint32_t n_probe,
                              const DcoStrategy& dco, DcoStats* stats) const {
    if (k == 0) throw InvalidInput("IvfIndex::search: k must be positive");
    if (n_probe == 0 || n_probe > n_clusters_)
        throw InvalidInput("IvfIndex::search: n_probe must be in [1, n_clusters], got " +
                           std::to_string(n_probe));
    if (dco.dim() != dim_) throw InvalidInput("IvfIndex::search: strategy dim mismatch");

    // Exact centroid ranking; ties break by cluster id.
    std::vector<Neighbor> order(n_clusters_);
    for (std::uint32_t c = 0; c < n_clusters_; ++c)
        order[c] = {l2_sq(query, centroids_.data() + static_cast<std::size_t>(c) * dim_, dim_), c};
    std::sort(order.begin(), order.end());

    TopKHeap heap(k);
    for (std::uint32_t p = 0; p < n_probe; ++p) {
        const std::uint32_t c = order[p].id;
        const std::uint32_t len = list_size(c);
        for (std::uint32_t pos = 0; pos < len; ++pos) {
            const DcoOutcome out = dco.evaluate(candidate(c, pos), query, heap.threshold(), stats);
            if (!out.pruned) heap.push({out.distance, candidate_id(c, pos)});
        }
    }
    return heap.take_sorted();
}

void IvfIndex::save(const std::filesystem::path& path) const {
    auto out = detail::open_output(path);
    out.write(kMagic, sizeof kMagic);
    detail::write_pod(out, kVersion);
    detail::write_pod(out, static_cast<std::uint8_t>(layout_));
    detail::write_pod(out, dim_);
    detail::write_pod(out, count_);
    detail::write_pod(out, n_clusters_);
    detail::write_pod(out, split_);
    detail::write_span(out, centroids_.data(), centroids_.size());
    detail::write_span(out, offsets_.data(), offsets_.size());
    detail::write_span(out, ids_.data(), ids_.size());
    detail::write_span(out, storage_.data(), storage_.size());
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

IvfIndex IvfIndex::load(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    char magic[4];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("not an ivf index file: " + path.string());
    const auto version = detail::read_pod<std::uint32_t>(in, "version");
    if (version != kVersion)
        throw std::runtime_error("unsupported ivf index version " + std::to_string(version));

    IvfIndex idx;
    const auto layout_raw = detail::read_pod<std::uint8_t>(in, "layout");
    if (layout_raw > 1) throw std::runtime_error("bad ivf layout byte");
    idx.layout_ = static_cast<IvfLayout>(layout_raw);
    idx.dim_ = detail::read_pod<std::uint32_t>(in, "dim");
    idx.count_ = detail::read_pod<std::uint32_t>(in, "count");
    idx.n_clusters_ = detail::read_pod<std::uint32_t>(in, "n_clusters");
    idx.split_ = detail::read_pod<std::uint32_t>(in, "split");
    if (idx.dim_ == 0 || idx.n_clusters_ == 0 || idx.split_ == 0 || idx.split_ > idx.dim_)
        throw std::runtime_error("inconsistent ivf header");
    idx.centroids_ = detail::read_vec<float>(in, static_cast<std::size_t>(idx.n_clusters_) * idx.dim_,
                                             "centroids");
    idx.offsets_ = detail::read_vec<std::uint32_t>(in, idx.n_clusters_ + 1, "offsets");
    if (idx.offsets_.front() != 0 || idx.offsets_.back() != idx.count_ ||
        !std::is_sorted(idx.offsets_.begin(), idx.offsets_.end()))
        throw std::runtime_error("inconsistent ivf posting offsets");
    idx.ids_ = detail::read_vec<std::uint32_t>(in, idx.count_, "ids");
    idx.storage_ = detail::read_vec<float>(in, static_cast<std::size_t>(idx.count_) * idx.dim_,
                                           "storage");
    return idx;
}

}  // namespace dade
