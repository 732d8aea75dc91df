#include "dade/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <queue>
#include <random>
#include <stdexcept>

#include "dade/detail/binary_io.hpp"
#include "dade/distance.hpp"
#include "dade/error.hpp"
#include "dade/rng.hpp"

namespace dade {

namespace {

constexpr char kMagic[4] = {'D', 'H', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;

// Epoch-stamped visited marks: reset is O(1), storage is reused across
// queries on the same thread.
class VisitedTable {
public:
    void reset(std::size_t n) {
        if (stamp_.size() < n) stamp_.resize(n, 0);
        if (++epoch_ == 0) {
            std::fill(stamp_.begin(), stamp_.end(), 0);
            epoch_ = 1;
        }
    }
    bool test_and_set(std::uint32_t i) {
        if (stamp_[i] == epoch_) return true;
        stamp_[i] = epoch_;
        return false;
    }

private:
    std::vector<std::uint32_t> stamp_;
    std::uint32_t epoch_ = 0;
};

thread_local VisitedTable tl_visited;

struct NeighborGreater {
    bool operator()(const Neighbor& a, const Neighbor& b) const { return b < a; }
};
using MinQueue = std::priority_queue<Neighbor, std::vector<Neighbor>, NeighborGreater>;

}  // namespace

std::uint32_t HnswIndex::greedy_descend(const float* q, std::uint32_t ep, std::int32_t from,
                                        std::int32_t to) const {
    float best = l2_sq(vector_data(ep), q, dim_);
    for (std::int32_t level = from; level > to; --level) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (const std::uint32_t nb : layers_[static_cast<std::size_t>(level)][ep]) {
                const float d2 = l2_sq(vector_data(nb), q, dim_);
                if (d2 < best || (d2 == best && nb < ep)) {
                    best = d2;
                    ep = nb;
                    improved = true;
                }
            }
        }
    }
    return ep;
}

std::vector<Neighbor> HnswIndex::search_layer_exact(const float* q, std::uint32_t ep,
                                                    std::uint32_t ef, std::int32_t level) const {
    tl_visited.reset(count_);
    tl_visited.test_and_set(ep);

    TopKHeap results(ef);
    MinQueue todo;
    const float d0 = std::sqrt(l2_sq(vector_data(ep), q, dim_));
    results.push({d0, ep});
    todo.push({d0, ep});

    while (!todo.empty()) {
        const Neighbor c = todo.top();
        todo.pop();
        if (results.full() && results.worst() < c) break;
        for (const std::uint32_t nb : layers_[static_cast<std::size_t>(level)][c.id]) {
            if (tl_visited.test_and_set(nb)) continue;
            const float d = std::sqrt(l2_sq(vector_data(nb), q, dim_));
            if (results.push({d, nb})) todo.push({d, nb});
        }
    }
    return results.take_sorted().neighbors;
}

std::vector<std::uint32_t> HnswIndex::select_neighbors(const float* q,
                                                       const std::vector<Neighbor>& cands,
                                                       std::uint32_t cap) const {
    // Closest-first; keep a candidate only if it is closer to q than to any
    // neighbor already kept, which spreads links across directions.
    std::vector<std::uint32_t> selected;
    for (const Neighbor& c : cands) {
        if (selected.size() >= cap) break;
        const float dq = std::sqrt(l2_sq(vector_data(c.id), q, dim_));
        bool keep = true;
        for (const std::uint32_t s : selected) {
            const float ds = std::sqrt(l2_sq(vector_data(c.id), vector_data(s), dim_));
            if (ds < dq) {
                keep = false;
                break;
            }
        }
        if (keep) selected.push_back(c.id);
    }
    return selected;
}

void HnswIndex::insert(std::uint32_t id) {
    const std::int32_t level = levels_[id];
    const float* q = vector_data(id);

    std::uint32_t ep = entry_;
    if (level < max_level_) ep = greedy_descend(q, ep, max_level_, level);

    for (std::int32_t l = std::min(level, max_level_); l >= 0; --l) {
        const std::vector<Neighbor> cands = search_layer_exact(q, ep, ef_construction_, l);
        const std::vector<std::uint32_t> selected = select_neighbors(q, cands, m_);
        auto& layer = layers_[static_cast<std::size_t>(l)];
        for (const std::uint32_t s : selected) {
            layer[id].push_back(s);
            layer[s].push_back(id);
            if (layer[s].size() > degree_cap(l)) {
                // Overflow: re-prune the neighbor's list from its own view.
                std::vector<Neighbor> own;
                own.reserve(layer[s].size());
                for (const std::uint32_t nb : layer[s])
                    own.push_back({std::sqrt(l2_sq(vector_data(s), vector_data(nb), dim_)), nb});
                std::sort(own.begin(), own.end());
                layer[s] = select_neighbors(vector_data(s), own, degree_cap(l));
            }
        }
        ep = cands.front().id;
    }

    if (level > max_level_) {
        max_level_ = level;
        entry_ = id;
    }
}

HnswIndex HnswIndex::build(const VectorSet& data, std::uint32_t m, std::uint32_t ef_construction,
                           std::uint64_t seed) {
    data.validate();
    if (m < 2) throw InvalidInput("HnswIndex: m must be at least 2");
    if (ef_construction == 0) throw InvalidInput("HnswIndex: ef_construction must be positive");

    HnswIndex idx;
    idx.dim_ = data.dim;
    idx.count_ = data.count;
    idx.m_ = m;
    idx.ef_construction_ = ef_construction;
    idx.vectors_ = data.values;

    // Geometric level assignment with decay 1/ln(m).
    const double mult = 1.0 / std::log(static_cast<double>(m));
    std::mt19937_64 gen(seed);
    idx.levels_.resize(data.count);
    std::int32_t top = 0;
    for (std::uint32_t i = 0; i < data.count; ++i) {
        double u = rng::uniform01(gen);
        while (u <= 0.0) u = rng::uniform01(gen);
        idx.levels_[i] = static_cast<std::int32_t>(-std::log(u) * mult);
        top = std::max(top, idx.levels_[i]);
    }
    idx.layers_.resize(static_cast<std::size_t>(top) + 1);
    for (auto& layer : idx.layers_) layer.resize(data.count);

    idx.entry_ = 0;
    idx.max_level_ = idx.levels_[0];
    for (std::uint32_t i = 1; i < data.count; ++i) idx.insert(i);
    return idx;
}

SearchResult HnswIndex::search(const float* query, std::uint32_t k, std::uint32_t ef,
                               const DcoStrategy& dco, bool decoupled, DcoStats* stats) const {
    if (k == 0) throw InvalidInput("HnswIndex::search: k must be positive");
    if (k > ef)
        throw InvalidInput("HnswIndex::search: k (" + std::to_string(k) +
                           ") must not exceed ef (" + std::to_string(ef) + ")");
    if (dco.dim() != dim_) throw InvalidInput("HnswIndex::search: strategy dim mismatch");

    const std::uint32_t ep = greedy_descend(query, entry_, max_level_, 0);

    tl_visited.reset(count_);
    TopKHeap steer(ef);
    TopKHeap best(decoupled ? k : ef);  // DCO threshold source
    MinQueue todo;

    const auto consider = [&](std::uint32_t id) {
        const float r = decoupled ? best.threshold() : steer.threshold();
        const DcoOutcome out =
            dco.evaluate(SplitView::contiguous(vector_data(id), dim_), query, r, stats);
        if (!out.pruned) {
            if (decoupled) best.push({out.distance, id});
            if (steer.push({out.distance, id})) todo.push({out.distance, id});
        } else if (decoupled) {
            // Keep rejected candidates walkable, keyed by their last estimate.
            if (steer.push({out.distance, id})) todo.push({out.distance, id});
        }
    };

    tl_visited.test_and_set(ep);
    consider(ep);

    while (!todo.empty()) {
        const Neighbor c = todo.top();
        todo.pop();
        if (steer.full() && steer.worst() < c) break;
        for (const std::uint32_t nb : layers_[0][c.id]) {
            if (tl_visited.test_and_set(nb)) continue;
            consider(nb);
        }
    }

    if (decoupled) return best.take_sorted();
    SearchResult all = steer.take_sorted();
    SearchResult res;
    res.neighbors.assign(all.neighbors.begin(),
                         all.neighbors.begin() + std::min<std::size_t>(k, all.neighbors.size()));
    res.truncated = res.neighbors.size() < k;
    return res;
}

void HnswIndex::save(const std::filesystem::path& path) const {
    auto out = detail::open_output(path);
    out.write(kMagic, sizeof kMagic);
    detail::write_pod(out, kVersion);
    detail::write_pod(out, dim_);
    detail::write_pod(out, count_);
    detail::write_pod(out, m_);
    detail::write_pod(out, ef_construction_);
    detail::write_pod(out, entry_);
    detail::write_pod(out, max_level_);
    detail::write_span(out, levels_.data(), levels_.size());
    for (std::int32_t l = 0; l <= max_level_; ++l) {
        const auto& layer = layers_[static_cast<std::size_t>(l)];
        std::uint64_t offset = 0;
        detail::write_pod(out, offset);
        for (const auto& nbrs : layer) {
            offset += nbrs.size();
            detail::write_pod(out, offset);
        }
        for (const auto& nbrs : layer) detail::write_span(out, nbrs.data(), nbrs.size());
    }
    detail::write_span(out, vectors_.data(), vectors_.size());
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

HnswIndex HnswIndex::load(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    char magic[4];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("not an hnsw index file: " + path.string());
    const auto version = detail::read_pod<std::uint32_t>(in, "version");
    if (version != kVersion)
        throw std::runtime_error("unsupported hnsw index version " + std::to_string(version));

    HnswIndex idx;
    idx.dim_ = detail::read_pod<std::uint32_t>(in, "dim");
    idx.count_ = detail::read_pod<std::uint32_t>(in, "count");
    idx.m_ = detail::read_pod<std::uint32_t>(in, "m");
    idx.ef_construction_ = detail::read_pod<std::uint32_t>(in, "ef_construction");
    idx.entry_ = detail::read_pod<std::uint32_t>(in, "entry");
    idx.max_level_ = detail::read_pod<std::int32_t>(in, "max_level");
    if (idx.dim_ == 0 || idx.count_ == 0 || idx.m_ < 2 || idx.entry_ >= idx.count_ ||
        idx.max_level_ < 0)
        throw std::runtime_error("inconsistent hnsw header");
    idx.levels_ = detail::read_vec<std::int32_t>(in, idx.count_, "levels");
    idx.layers_.resize(static_cast<std::size_t>(idx.max_level_) + 1);
    for (std::int32_t l = 0; l <= idx.max_level_; ++l) {
        const auto offsets =
            detail::read_vec<std::uint64_t>(in, static_cast<std::size_t>(idx.count_) + 1,
                                            "layer offsets");
        if (offsets.front() != 0 || !std::is_sorted(offsets.begin(), offsets.end()))
            throw std::runtime_error("inconsistent hnsw layer offsets");
        const auto flat = detail::read_vec<std::uint32_t>(in, offsets.back(), "layer neighbors");
        for (const std::uint32_t nb : flat)
            if (nb >= idx.count_) throw std::runtime_error("hnsw neighbor id out of range");
        auto& layer = idx.layers_[static_cast<std::size_t>(l)];
        layer.resize(idx.count_);
        for (std::uint32_t i = 0; i < idx.count_; ++i)
            layer[i].assign(flat.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                            flat.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
    }
    idx.vectors_ = detail::read_vec<float>(in, static_cast<std::size_t>(idx.count_) * idx.dim_,
                                           "vectors");
    return idx;
}

}  // namespace dade
