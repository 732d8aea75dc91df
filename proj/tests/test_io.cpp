#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "dade/dataset_io.hpp"
#include "dade/error.hpp"
#include "util.hpp"

using namespace dade;
using testutil::TempDir;

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

// Quadratic reference: sort every (squared distance, id) pair per query.
std::vector<std::vector<std::uint32_t>> brute_knn(const VectorSet& data, const VectorSet& queries,
                                                  std::uint32_t k) {
    std::vector<std::vector<std::uint32_t>> out(queries.count);
    for (std::uint32_t qi = 0; qi < queries.count; ++qi) {
        std::vector<std::pair<double, std::uint32_t>> all;
        for (std::uint32_t id = 0; id < data.count; ++id) {
            double d2 = 0.0;
            for (std::uint32_t c = 0; c < data.dim; ++c) {
                const double diff = static_cast<double>(data.row(id)[c]) -
                                    static_cast<double>(queries.row(qi)[c]);
                d2 += diff * diff;
            }
            all.emplace_back(d2, id);
        }
        std::sort(all.begin(), all.end());
        for (std::uint32_t i = 0; i < k; ++i) out[qi].push_back(all[i].second);
    }
    return out;
}

}  // namespace

TEST_CASE("fvecs record layout is dimension header plus float payload") {
    TempDir tmp;
    VectorSet v;
    v.count = 1;
    v.dim = 2;
    v.values = {1.0f, 2.0f};
    write_fvecs(tmp.file("one.fvecs"), v);

    const std::vector<unsigned char> expected = {
        0x02, 0x00, 0x00, 0x00,  // int32 dim = 2
        0x00, 0x00, 0x80, 0x3f,  // 1.0f
        0x00, 0x00, 0x00, 0x40,  // 2.0f
    };
    CHECK(slurp(tmp.file("one.fvecs")) == expected);

    const VectorSet back = read_fvecs(tmp.file("one.fvecs"));
    CHECK(back.count == 1);
    CHECK(back.dim == 2);
    CHECK(back.values == v.values);
}

TEST_CASE("fvecs round trip preserves every bit") {
    TempDir tmp;
    VectorSet v = testutil::gaussian_set(64, 9, 42);
    v.values[3] = -0.0f;
    v.values[7] = 1e-41f;  // subnormal
    write_fvecs(tmp.file("r.fvecs"), v);
    const VectorSet back = read_fvecs(tmp.file("r.fvecs"));
    REQUIRE(back.count == v.count);
    REQUIRE(back.dim == v.dim);
    CHECK(std::memcmp(back.values.data(), v.values.data(), v.values.size() * sizeof(float)) == 0);
}

TEST_CASE("fvecs read rejects malformed files") {
    TempDir tmp;

    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_fvecs(tmp.file("nope.fvecs")), std::runtime_error);
    }
    SUBCASE("empty file") {
        dump(tmp.file("empty.fvecs"), {});
        CHECK_THROWS_AS(read_fvecs(tmp.file("empty.fvecs")), InvalidInput);
    }
    SUBCASE("torn header") {
        dump(tmp.file("torn.fvecs"), {0x02, 0x00});
        CHECK_THROWS_AS(read_fvecs(tmp.file("torn.fvecs")), std::runtime_error);
    }
    SUBCASE("truncated payload") {
        dump(tmp.file("trunc.fvecs"), {0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3f});
        CHECK_THROWS_AS(read_fvecs(tmp.file("trunc.fvecs")), std::runtime_error);
    }
    SUBCASE("nonpositive dimension") {
        dump(tmp.file("neg.fvecs"), {0xff, 0xff, 0xff, 0xff});
        CHECK_THROWS_AS(read_fvecs(tmp.file("neg.fvecs")), std::runtime_error);
    }
    SUBCASE("inconsistent dimensions") {
        dump(tmp.file("mix.fvecs"), {0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3f,
                                     0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3f,
                                     0x00, 0x00, 0x80, 0x3f});
        CHECK_THROWS_AS(read_fvecs(tmp.file("mix.fvecs")), std::runtime_error);
    }
    SUBCASE("non-finite payload") {
        // int32 dim = 1 followed by a quiet NaN
        dump(tmp.file("nan.fvecs"), {0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0xc0, 0x7f});
        CHECK_THROWS_AS(read_fvecs(tmp.file("nan.fvecs")), InvalidInput);
    }
}

TEST_CASE("ivecs round trip, negative values allowed") {
    TempDir tmp;
    const std::vector<std::vector<std::int32_t>> recs = {{1, -2, 3}, {0, 0, 7}};
    write_ivecs(tmp.file("a.ivecs"), recs);
    CHECK(read_ivecs(tmp.file("a.ivecs")) == recs);

    CHECK_THROWS_AS(write_ivecs(tmp.file("b.ivecs"), {{1}, {1, 2}}), InvalidInput);
    CHECK_THROWS_AS(write_ivecs(tmp.file("c.ivecs"), {{}}), InvalidInput);
}

TEST_CASE("ground truth matches a quadratic full sort") {
    SynthSpec spec;
    spec.count = 300;
    spec.dim = 12;
    spec.query_count = 25;
    spec.seed = 9;
    const SynthDataset ds = make_synthetic(spec);

    const GroundTruth gt = compute_ground_truth(ds.data, ds.queries, 15);
    const auto oracle = brute_knn(ds.data, ds.queries, 15);
    REQUIRE(gt.ids.size() == oracle.size());
    for (std::size_t qi = 0; qi < oracle.size(); ++qi) CHECK(gt.ids[qi] == oracle[qi]);
}

TEST_CASE("ground truth id sets survive relabeling the base vectors") {
    VectorSet data = testutil::gaussian_set(200, 8, 3);
    const VectorSet queries = testutil::gaussian_set(10, 8, 4);
    const GroundTruth before = compute_ground_truth(data, queries, 7);

    std::vector<std::uint32_t> perm(data.count);
    std::iota(perm.begin(), perm.end(), 0u);
    std::mt19937_64 gen(5);
    std::shuffle(perm.begin(), perm.end(), gen);
    VectorSet shuffled = data;
    for (std::uint32_t i = 0; i < data.count; ++i)
        std::copy_n(data.row(i), data.dim, shuffled.row(perm[i]));

    const GroundTruth after = compute_ground_truth(shuffled, queries, 7);
    for (std::uint32_t qi = 0; qi < queries.count; ++qi) {
        std::vector<std::uint32_t> mapped;
        for (const std::uint32_t id : before.ids[qi]) mapped.push_back(perm[id]);
        std::sort(mapped.begin(), mapped.end());
        std::vector<std::uint32_t> got = after.ids[qi];
        std::sort(got.begin(), got.end());
        CHECK(mapped == got);
    }
}

TEST_CASE("ground truth argument checks") {
    const VectorSet data = testutil::gaussian_set(10, 4, 1);
    const VectorSet queries = testutil::gaussian_set(2, 4, 2);
    CHECK_THROWS_AS(compute_ground_truth(data, queries, 0), InvalidInput);
    CHECK_THROWS_AS(compute_ground_truth(data, queries, 11), InvalidInput);
    const VectorSet wrong = testutil::gaussian_set(2, 5, 2);
    CHECK_THROWS_AS(compute_ground_truth(data, wrong, 1), InvalidInput);
}

TEST_CASE("ground truth file round trip") {
    TempDir tmp;
    const VectorSet data = testutil::gaussian_set(50, 6, 11);
    const VectorSet queries = testutil::gaussian_set(5, 6, 12);
    const GroundTruth gt = compute_ground_truth(data, queries, 4);
    write_ground_truth(tmp.file("gt.ivecs"), gt);
    const GroundTruth back = read_ground_truth(tmp.file("gt.ivecs"));
    CHECK(back.k == gt.k);
    CHECK(back.ids == gt.ids);

    // A negative id cannot be a vector index.
    write_ivecs(tmp.file("bad.ivecs"), {{0, -1}});
    CHECK_THROWS_AS(read_ground_truth(tmp.file("bad.ivecs")), std::runtime_error);
}

TEST_CASE("recall counts id overlap per query") {
    GroundTruth truth;
    truth.k = 2;
    truth.ids = {{1, 2}, {3, 4}};

    CHECK(recall({{1, 2}, {3, 4}}, truth) == doctest::Approx(1.0));
    CHECK(recall({{2, 1}, {4, 3}}, truth) == doctest::Approx(1.0));  // order free
    CHECK(recall({{9, 8}, {7, 6}}, truth) == doctest::Approx(0.0));
    CHECK(recall({{1, 9}, {3, 9}}, truth) == doctest::Approx(0.5));
    CHECK(recall({{1, 2}, {9, 8}}, truth) == doctest::Approx(0.5));

    CHECK_THROWS_AS(recall({{1, 2}}, truth), InvalidInput);
}

TEST_CASE("synth config parsing") {
    SUBCASE("full config with comments") {
        std::istringstream in(
            "# comment line\n"
            "count = 10\n"
            "dim = 4   # trailing comment\n"
            "queries=3\n"
            "seed = 99\n"
            "spectrum = values\n"
            "values = 4, 2, 1, 0.5\n"
            "rotate = false\n"
            "mean_shift = -1.5\n");
        const SynthSpec spec = parse_synth_spec(in);
        CHECK(spec.count == 10);
        CHECK(spec.dim == 4);
        CHECK(spec.query_count == 3);
        CHECK(spec.seed == 99);
        CHECK(spec.spectrum == SynthSpec::Spectrum::values);
        CHECK(spec.values == std::vector<double>{4, 2, 1, 0.5});
        CHECK_FALSE(spec.rotate);
        CHECK(spec.mean_shift == doctest::Approx(-1.5));
    }
    SUBCASE("unknown key") {
        std::istringstream in("count = 1\ndim = 2\nwibble = 3\n");
        CHECK_THROWS_AS(parse_synth_spec(in), ConfigError);
    }
    SUBCASE("missing required keys") {
        std::istringstream in("dim = 2\n");
        CHECK_THROWS_AS(parse_synth_spec(in), ConfigError);
    }
    SUBCASE("bad value") {
        std::istringstream in("count = soup\ndim = 2\n");
        CHECK_THROWS_AS(parse_synth_spec(in), ConfigError);
    }
    SUBCASE("line without equals") {
        std::istringstream in("count = 1\ndim\n");
        CHECK_THROWS_AS(parse_synth_spec(in), ConfigError);
    }
}

TEST_CASE("synth spectrum shapes") {
    SynthSpec spec;
    spec.count = 1;
    spec.dim = 4;

    spec.spectrum = SynthSpec::Spectrum::power;
    spec.alpha = 2.0;
    const auto power = synth_spectrum(spec);
    CHECK(power[0] == doctest::Approx(1.0));
    CHECK(power[1] == doctest::Approx(0.25));
    CHECK(power[3] == doctest::Approx(1.0 / 16.0));

    spec.spectrum = SynthSpec::Spectrum::uniform;
    CHECK(synth_spectrum(spec) == std::vector<double>{1, 1, 1, 1});

    spec.spectrum = SynthSpec::Spectrum::values;
    spec.values = {1, 2};
    CHECK_THROWS_AS(synth_spectrum(spec), ConfigError);
    spec.values = {1, 2, 3, -4};
    CHECK_THROWS_AS(synth_spectrum(spec), ConfigError);
}

TEST_CASE("synthetic data is deterministic per seed") {
    SynthSpec spec;
    spec.count = 40;
    spec.dim = 6;
    spec.query_count = 8;
    spec.seed = 1234;

    const SynthDataset a = make_synthetic(spec);
    const SynthDataset b = make_synthetic(spec);
    CHECK(a.data.values == b.data.values);
    CHECK(a.queries.values == b.queries.values);

    spec.seed = 1235;
    const SynthDataset c = make_synthetic(spec);
    CHECK(a.data.values != c.data.values);
}

TEST_CASE("synthetic rotation preserves norms") {
    SynthSpec spec;
    spec.count = 100;
    spec.dim = 10;
    spec.seed = 7;
    spec.rotate = false;
    const VectorSet plain = make_synthetic(spec).data;
    spec.rotate = true;
    const VectorSet rotated = make_synthetic(spec).data;

    for (std::uint32_t i = 0; i < plain.count; ++i) {
        double n0 = 0.0, n1 = 0.0;
        for (std::uint32_t c = 0; c < plain.dim; ++c) {
            n0 += static_cast<double>(plain.row(i)[c]) * plain.row(i)[c];
            n1 += static_cast<double>(rotated.row(i)[c]) * rotated.row(i)[c];
        }
        CHECK(n1 == doctest::Approx(n0).epsilon(1e-4));
    }
}

TEST_CASE("synthetic spectrum and mean shift show up empirically") {
    SynthSpec spec;
    spec.count = 20000;
    spec.dim = 4;
    spec.seed = 21;
    spec.rotate = false;
    spec.spectrum = SynthSpec::Spectrum::values;
    spec.values = {9.0, 4.0, 1.0, 0.25};
    spec.mean_shift = 5.0;
    const VectorSet data = make_synthetic(spec).data;

    for (std::uint32_t c = 0; c < spec.dim; ++c) {
        double mean = 0.0;
        for (std::uint32_t i = 0; i < data.count; ++i) mean += data.row(i)[c];
        mean /= data.count;
        double var = 0.0;
        for (std::uint32_t i = 0; i < data.count; ++i) {
            const double d = data.row(i)[c] - mean;
            var += d * d;
        }
        var /= data.count;
        CHECK(mean == doctest::Approx(5.0).epsilon(0.02));
        CHECK(var == doctest::Approx(spec.values[c]).epsilon(0.06));
    }
}
