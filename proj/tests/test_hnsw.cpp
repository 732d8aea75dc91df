#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "dade/calibration.hpp"
#include "dade/dataset_io.hpp"
#include "dade/error.hpp"
#include "dade/estimator.hpp"
#include "dade/hnsw.hpp"
#include "dade/transform.hpp"
#include "util.hpp"

using namespace dade;

namespace {

std::pair<VectorSet, VectorSet> split_rows(const VectorSet& all, std::uint32_t n_head) {
    VectorSet head, tail;
    head.count = n_head;
    tail.count = all.count - n_head;
    head.dim = tail.dim = all.dim;
    head.values.assign(all.values.begin(), all.values.begin() + std::size_t(n_head) * all.dim);
    tail.values.assign(all.values.begin() + std::size_t(n_head) * all.dim, all.values.end());
    return {std::move(head), std::move(tail)};
}

struct Fix {
    VectorSet data;
    VectorSet queries;
    OrthoTransform t;
    CalibrationTable cal;
    HnswIndex index;

    Fix()
        : index([this] {
              const auto raw = testutil::gaussian_set(1020, 16, 303, 1.0, true);
              t = fit_pca(raw);
              const auto rotated = apply_transform(t, raw);
              auto [d, q] = split_rows(rotated, 1000);
              data = std::move(d);
              queries = std::move(q);
              cal = calibrate(t, data, 0.1, 4, 20000, 3);
              return HnswIndex::build(data, 8, 100, 7);
          }()) {}
};

const Fix& fix() {
    static const Fix f;
    return f;
}

bool same_neighbors(const SearchResult& a, const SearchResult& b) {
    if (a.neighbors.size() != b.neighbors.size()) return false;
    for (std::size_t i = 0; i < a.neighbors.size(); ++i)
        if (a.neighbors[i].id != b.neighbors[i].id ||
            a.neighbors[i].distance != b.neighbors[i].distance)
            return false;
    return a.truncated == b.truncated;
}

double level0_reachable_fraction(const HnswIndex& idx) {
    std::vector<char> seen(idx.count(), 0);
    std::deque<std::uint32_t> todo{idx.entry_point()};
    seen[idx.entry_point()] = 1;
    std::size_t visited = 0;
    while (!todo.empty()) {
        const std::uint32_t id = todo.front();
        todo.pop_front();
        ++visited;
        for (const std::uint32_t nb : idx.neighbors(0, id))
            if (!seen[nb]) {
                seen[nb] = 1;
                todo.push_back(nb);
            }
    }
    return static_cast<double>(visited) / idx.count();
}

}  // namespace

TEST_CASE("a single-point index is searchable") {
    VectorSet one;
    one.count = 1;
    one.dim = 8;
    one.values.assign(8, 0.25f);
    const auto idx = HnswIndex::build(one, 4, 10, 1);

    CHECK(idx.count() == 1);
    CHECK(idx.entry_point() == 0);
    CHECK(idx.neighbors(0, 0).empty());

    const FdScanningStrategy fd(8);
    for (const bool decoupled : {false, true}) {
        const auto res = idx.search(one.row(0), 1, 1, fd, decoupled);
        REQUIRE(res.neighbors.size() == 1);
        CHECK(res.neighbors[0].id == 0);
        CHECK(res.neighbors[0].distance == 0.0f);
        CHECK(!res.truncated);
    }
}

TEST_CASE("graph degrees respect the per-level caps") {
    const auto& idx = fix().index;

    CHECK(idx.level_of(idx.entry_point()) == idx.max_level());
    CHECK(idx.max_level() >= 1);  // 1000 points with m = 8 always spawn upper layers

    for (std::uint32_t id = 0; id < idx.count(); ++id) {
        REQUIRE(idx.level_of(id) >= 0);
        REQUIRE(idx.level_of(id) <= idx.max_level());
        for (std::int32_t level = 0; level <= idx.max_level(); ++level) {
            const auto& nbs = idx.neighbors(level, id);
            if (level > idx.level_of(id)) {
                CHECK(nbs.empty());
                continue;
            }
            CHECK(nbs.size() <= (level == 0 ? 2 * idx.m() : idx.m()));
            std::set<std::uint32_t> uniq(nbs.begin(), nbs.end());
            CHECK(uniq.size() == nbs.size());
            CHECK(uniq.count(id) == 0);
            for (const std::uint32_t nb : nbs) {
                CHECK(nb < idx.count());
                // A link may only target a node present on this level.
                CHECK(idx.level_of(nb) >= level);
            }
        }
    }
}

TEST_CASE("the base layer is connected from the entry point") {
    CHECK(level0_reachable_fraction(fix().index) >= 0.99);
}

TEST_CASE("beam width equal to the dataset gives exact results") {
    const auto& fx = fix();
    const FdScanningStrategy fd(16);
    const auto gt = compute_ground_truth(fx.data, fx.queries, 10);

    std::vector<std::vector<std::uint32_t>> found;
    for (std::uint32_t q = 0; q < fx.queries.count; ++q)
        found.push_back(fx.index.search(fx.queries.row(q), 10, fx.data.count, fd, false).ids());
    CHECK(recall(found, gt) == 1.0);
}

TEST_CASE("every stored vector retrieves itself") {
    const auto& fx = fix();
    const FdScanningStrategy fd(16);
    for (std::uint32_t i = 0; i < fx.data.count; i += 13) {
        const auto res = fx.index.search(fx.data.row(i), 1, 30, fd, false);
        REQUIRE(res.neighbors.size() == 1);
        CHECK(res.neighbors[0].id == i);
        CHECK(res.neighbors[0].distance == 0.0f);
    }
}

TEST_CASE("decoupled traversal with an exact scanner changes nothing") {
    // With exact distances the tighter decoupled threshold prunes exactly the
    // candidates the steering heap would discard anyway, so both modes walk
    // the same path and land on the same neighbors.
    const auto& fx = fix();
    const FdScanningStrategy fd(16);
    for (std::uint32_t q = 0; q < fx.queries.count; ++q)
        CHECK(same_neighbors(fx.index.search(fx.queries.row(q), 10, 50, fd, false),
                             fx.index.search(fx.queries.row(q), 10, 50, fd, true)));
}

TEST_CASE("coupled and decoupled adaptive searches agree on quality") {
    const auto& fx = fix();
    const DadeStrategy dade(fx.t, fx.cal, 4);
    const auto gt = compute_ground_truth(fx.data, fx.queries, 10);

    std::vector<std::vector<std::uint32_t>> coupled, decoupled;
    for (std::uint32_t q = 0; q < fx.queries.count; ++q) {
        coupled.push_back(fx.index.search(fx.queries.row(q), 10, 60, dade, false).ids());
        decoupled.push_back(fx.index.search(fx.queries.row(q), 10, 60, dade, true).ids());
    }
    const double rc = recall(coupled, gt);
    const double rd = recall(decoupled, gt);
    CHECK(rc >= 0.9);
    CHECK(rd >= 0.9);
    CHECK(std::abs(rc - rd) <= 0.05);
}

TEST_CASE("search parameters are validated") {
    const auto& fx = fix();
    const FdScanningStrategy fd(16);

    CHECK_THROWS_WITH_AS(fx.index.search(fx.queries.row(0), 0, 10, fd, false),
                         doctest::Contains("k"), InvalidInput);
    CHECK_THROWS_WITH_AS(fx.index.search(fx.queries.row(0), 20, 10, fd, false),
                         doctest::Contains("must not exceed ef"), InvalidInput);
    const FdScanningStrategy wrong_dim(4);
    CHECK_THROWS_WITH_AS(fx.index.search(fx.queries.row(0), 10, 20, wrong_dim, false),
                         doctest::Contains("dim"), InvalidInput);

    SUBCASE("build parameters too") {
        const auto tiny = testutil::gaussian_set(10, 4, 1);
        CHECK_THROWS_WITH_AS(HnswIndex::build(tiny, 1, 10, 1), doctest::Contains("m"),
                             InvalidInput);
        CHECK_THROWS_WITH_AS(HnswIndex::build(tiny, 4, 0, 1),
                             doctest::Contains("ef_construction"), InvalidInput);
    }
}

TEST_CASE("an index survives a save and load round trip") {
    testutil::TempDir dir;
    const auto& fx = fix();

    const auto path = dir.file("index.hnsw");
    fx.index.save(path);
    const auto back = HnswIndex::load(path);

    CHECK(back.dim() == fx.index.dim());
    CHECK(back.count() == fx.index.count());
    CHECK(back.m() == fx.index.m());
    CHECK(back.ef_construction() == fx.index.ef_construction());
    CHECK(back.entry_point() == fx.index.entry_point());
    CHECK(back.max_level() == fx.index.max_level());
    for (std::uint32_t id = 0; id < back.count(); ++id) {
        REQUIRE(back.level_of(id) == fx.index.level_of(id));
        CHECK(std::memcmp(back.vector_data(id), fx.index.vector_data(id),
                          sizeof(float) * back.dim()) == 0);
        for (std::int32_t level = 0; level <= back.max_level(); ++level)
            CHECK(back.neighbors(level, id) == fx.index.neighbors(level, id));
    }

    const DadeStrategy dade(fx.t, fx.cal, 4);
    for (std::uint32_t q = 0; q < fx.queries.count; ++q)
        for (const bool decoupled : {false, true})
            CHECK(same_neighbors(fx.index.search(fx.queries.row(q), 10, 60, dade, decoupled),
                                 back.search(fx.queries.row(q), 10, 60, dade, decoupled)));
}

TEST_CASE("corrupt index files are rejected") {
    testutil::TempDir dir;
    const auto data = testutil::gaussian_set(60, 8, 11);
    const auto idx = HnswIndex::build(data, 4, 20, 2);
    const auto path = dir.file("index.hnsw");
    idx.save(path);

    const auto patched = [&](const char* name, std::streamoff offset, char byte) {
        const auto copy = dir.file(name);
        std::filesystem::copy_file(path, copy);
        std::fstream f(copy, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(offset);
        f.put(byte);
        return copy;
    };

    SUBCASE("bad magic") {
        CHECK_THROWS_WITH_AS(HnswIndex::load(patched("magic.hnsw", 0, 'X')),
                             doctest::Contains("not an hnsw index"), std::runtime_error);
    }
    SUBCASE("unsupported version") {
        CHECK_THROWS_WITH_AS(HnswIndex::load(patched("version.hnsw", 4, 99)),
                             doctest::Contains("version"), std::runtime_error);
    }
    SUBCASE("truncated file") {
        const auto copy = dir.file("short.hnsw");
        std::filesystem::copy_file(path, copy);
        std::filesystem::resize_file(copy, std::filesystem::file_size(copy) / 2);
        CHECK_THROWS_AS(HnswIndex::load(copy), std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(HnswIndex::load(dir.file("absent.hnsw")), std::runtime_error);
    }
}
