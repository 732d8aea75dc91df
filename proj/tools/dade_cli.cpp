#include "CLI11.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dade/bench.hpp"
#include "dade/calibration.hpp"
#include "dade/dataset_io.hpp"
#include "dade/defaults.hpp"
#include "dade/error.hpp"
#include "dade/hnsw.hpp"
#include "dade/ivf.hpp"
#include "dade/transform.hpp"

namespace {

using dade::ConfigError;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(tok);
    return out;
}

std::uint32_t parse_u32(const std::string& tok) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("bad integer '" + tok + "'");
    try {
        const unsigned long long v = std::stoull(tok);
        if (v > 0xffffffffull) throw ConfigError("integer out of range: " + tok);
        return static_cast<std::uint32_t>(v);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad integer '" + tok + "'");
    }
}

double parse_f64(const std::string& tok) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw ConfigError("bad number '" + tok + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad number '" + tok + "'");
    }
}

// Grids are either comma lists ("20,40,80") or inclusive ranges ("20:400:20").
std::vector<std::uint32_t> parse_grid_u32(const std::string& s) {
    std::vector<std::uint32_t> out;
    if (s.find(':') != std::string::npos) {
        std::istringstream in(s);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(in, part, ':')) parts.push_back(part);
        if (parts.size() != 3) throw ConfigError("bad range '" + s + "', expected lo:hi:step");
        const std::uint64_t lo = parse_u32(parts[0]);
        const std::uint64_t hi = parse_u32(parts[1]);
        const std::uint64_t step = parse_u32(parts[2]);
        if (step == 0) throw ConfigError("range step must be positive: " + s);
        if (lo > hi) throw ConfigError("range lower bound exceeds upper bound: " + s);
        for (std::uint64_t v = lo; v <= hi; v += step) out.push_back(static_cast<std::uint32_t>(v));
    } else {
        for (const std::string& tok : split_list(s)) out.push_back(parse_u32(tok));
    }
    if (out.empty()) throw ConfigError("empty grid '" + s + "'");
    return out;
}

std::vector<double> parse_grid_f64(const std::string& s) {
    std::vector<double> out;
    if (s.find(':') != std::string::npos) {
        std::istringstream in(s);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(in, part, ':')) parts.push_back(part);
        if (parts.size() != 3) throw ConfigError("bad range '" + s + "', expected lo:hi:step");
        const double lo = parse_f64(parts[0]);
        const double hi = parse_f64(parts[1]);
        const double step = parse_f64(parts[2]);
        if (!(step > 0)) throw ConfigError("range step must be positive: " + s);
        if (lo > hi) throw ConfigError("range lower bound exceeds upper bound: " + s);
        for (double v = lo; v <= hi + step * 1e-9; v += step) out.push_back(v);
    } else {
        for (const std::string& tok : split_list(s)) out.push_back(parse_f64(tok));
    }
    if (out.empty()) throw ConfigError("empty grid '" + s + "'");
    return out;
}

void with_output(const std::string& path, const std::function<void(std::ostream&)>& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    fn(out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::string sniff_magic(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char m[4] = {};
    in.read(m, 4);
    if (in.gcount() != 4) throw std::runtime_error(path + " is too short to be an index file");
    return std::string(m, 4);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dade: nearest-neighbor search with adaptive distance comparisons"};
    app.require_subcommand(1);

    // ---- synth ----
    struct {
        std::string config, out, queries;
    } so;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a config file");
    synth->add_option("--config", so.config, "key=value config file")->required();
    synth->add_option("--out", so.out, "output .fvecs for base vectors")->required();
    synth->add_option("--queries", so.queries, "output .fvecs for query vectors");
    synth->callback([&] {
        const dade::SynthSpec spec = dade::load_synth_spec(so.config);
        const dade::SynthDataset ds = dade::make_synthetic(spec);
        dade::write_fvecs(so.out, ds.data);
        std::cout << "wrote " << ds.data.count << " vectors (dim " << ds.data.dim << ") to "
                  << so.out << "\n";
        if (!so.queries.empty()) {
            if (spec.query_count == 0)
                throw ConfigError("--queries given but the config sets query_count=0");
            dade::write_fvecs(so.queries, ds.queries);
            std::cout << "wrote " << ds.queries.count << " queries to " << so.queries << "\n";
        }
    });

    // ---- fit ----
    struct {
        std::string data, out, kind = "pca";
        std::uint64_t seed = 1;
    } fo;
    auto* fit = app.add_subcommand("fit", "Fit an orthogonal transform on base vectors");
    fit->add_option("--data", fo.data, "base vectors (.fvecs)")->required();
    fit->add_option("--out", fo.out, "output transform file")->required();
    fit->add_option("--kind", fo.kind, "pca or random")->check(CLI::IsMember({"pca", "random"}));
    fit->add_option("--seed", fo.seed, "rng seed (random kind only)");
    fit->callback([&] {
        const dade::VectorSet data = dade::read_fvecs(fo.data);
        const dade::OrthoTransform t = fo.kind == "pca"
                                           ? dade::fit_pca(data)
                                           : dade::fit_random_orthogonal(data.dim, fo.seed, data);
        t.save(fo.out);
        std::cout << "fitted " << fo.kind << " transform (dim " << t.dim << ") -> " << fo.out
                  << "\n";
    });

    // ---- calibrate ----
    struct {
        std::string data, transform, out;
        double p_s = dade::defaults::p_s;
        std::uint32_t delta_d = dade::defaults::delta_d;
        std::uint64_t pairs = 0, seed = 1;
    } co;
    auto* cal = app.add_subcommand("calibrate", "Estimate per-checkpoint error quantiles");
    cal->add_option("--data", co.data, "base vectors (.fvecs)")->required();
    cal->add_option("--transform", co.transform, "transform file")->required();
    cal->add_option("--out", co.out, "output calibration file")->required();
    cal->add_option("--p-s", co.p_s, "target pruning failure probability");
    cal->add_option("--delta-d", co.delta_d, "checkpoint stride");
    cal->add_option("--pairs", co.pairs, "sampled pairs (0 = min(100000, all pairs))");
    cal->add_option("--seed", co.seed, "rng seed");
    cal->callback([&] {
        const dade::VectorSet data = dade::read_fvecs(co.data);
        const dade::OrthoTransform t = dade::OrthoTransform::load(co.transform);
        if (data.dim != t.dim)
            throw ConfigError("data dim " + std::to_string(data.dim) +
                              " does not match transform dim " + std::to_string(t.dim));
        const dade::VectorSet td = dade::apply_transform(t, data);
        const std::uint64_t n_pairs =
            co.pairs != 0 ? co.pairs : dade::defaults::calibration_pairs(data.count);
        const dade::CalibrationTable table =
            dade::calibrate(t, td, co.p_s, co.delta_d, n_pairs, co.seed);
        table.save(co.out);
        std::cout << "calibrated " << table.checkpoints.size() << " checkpoints from "
                  << table.sample_count << " pairs -> " << co.out << "\n";
    });

    // ---- build ----
    struct {
        std::string data, transform, out, index = "ivf", layout = "contiguous";
        std::uint32_t clusters = 0, split_dims = 0;
        std::uint32_t m = dade::defaults::hnsw_m;
        std::uint32_t efc = dade::defaults::hnsw_ef_construction;
        std::uint32_t kmeans_iters = dade::defaults::kmeans_max_iters;
        std::uint64_t seed = 1;
    } bo;
    auto* build = app.add_subcommand("build", "Build an index over transformed vectors");
    build->add_option("--data", bo.data, "base vectors (.fvecs)")->required();
    build->add_option("--transform", bo.transform, "transform file")->required();
    build->add_option("--out", bo.out, "output index file")->required();
    build->add_option("--index", bo.index, "ivf or hnsw")->check(CLI::IsMember({"ivf", "hnsw"}));
    build->add_option("--layout", bo.layout, "ivf storage layout")
        ->check(CLI::IsMember({"contiguous", "split"}));
    build->add_option("--clusters", bo.clusters, "ivf cluster count (0 = sqrt(count))");
    build->add_option("--split-dims", bo.split_dims,
                      "leading dims stored as one block in split layout (0 = min(32, dim))");
    build->add_option("--m", bo.m, "hnsw degree parameter");
    build->add_option("--ef-construction", bo.efc, "hnsw construction beam width");
    build->add_option("--kmeans-iters", bo.kmeans_iters, "ivf k-means iteration cap");
    build->add_option("--seed", bo.seed, "rng seed");
    build->callback([&] {
        const dade::VectorSet data = dade::read_fvecs(bo.data);
        const dade::OrthoTransform t = dade::OrthoTransform::load(bo.transform);
        if (data.dim != t.dim)
            throw ConfigError("data dim " + std::to_string(data.dim) +
                              " does not match transform dim " + std::to_string(t.dim));
        const dade::VectorSet td = dade::apply_transform(t, data);
        if (bo.index == "ivf") {
            const std::uint32_t n_clusters =
                bo.clusters != 0 ? bo.clusters : dade::defaults::ivf_n_clusters(td.count);
            const dade::IvfLayout layout =
                bo.layout == "split" ? dade::IvfLayout::split : dade::IvfLayout::contiguous;
            const std::uint32_t split_dims =
                bo.split_dims != 0 ? bo.split_dims : std::min(dade::defaults::delta_d, td.dim);
            const dade::IvfIndex idx =
                dade::IvfIndex::build(td, n_clusters, layout, split_dims, bo.kmeans_iters, bo.seed);
            idx.save(bo.out);
            std::cout << "built ivf index (" << n_clusters << " clusters, " << bo.layout
                      << " layout) -> " << bo.out << "\n";
        } else {
            const dade::HnswIndex idx = dade::HnswIndex::build(td, bo.m, bo.efc, bo.seed);
            idx.save(bo.out);
            std::cout << "built hnsw index (m " << bo.m << ", ef_construction " << bo.efc
                      << ") -> " << bo.out << "\n";
        }
    });

    // ---- gt ----
    struct {
        std::string data, queries, out;
        std::uint32_t k = 100;
    } go;
    auto* gt = app.add_subcommand("gt", "Compute exact K nearest neighbors");
    gt->add_option("--data", go.data, "base vectors (.fvecs)")->required();
    gt->add_option("--queries", go.queries, "query vectors (.fvecs)")->required();
    gt->add_option("--out", go.out, "output ground truth (.ivecs)")->required();
    gt->add_option("--k", go.k, "neighbors per query");
    gt->callback([&] {
        const dade::VectorSet data = dade::read_fvecs(go.data);
        const dade::VectorSet queries = dade::read_fvecs(go.queries);
        const dade::GroundTruth truth = dade::compute_ground_truth(data, queries, go.k);
        dade::write_ground_truth(go.out, truth);
        std::cout << "wrote top-" << truth.k << " ids for " << queries.count << " queries -> "
                  << go.out << "\n";
    });

    // ---- sweep ----
    struct {
        std::string index, data, transform, calibration, queries, gt, out;
        std::string dco = "fd";
        std::string n_probe = "20:400:20", n_ef = "100:1500:100", d_fixed;
        double eps0 = dade::defaults::adsampling_eps0;
        std::uint32_t delta_d = dade::defaults::delta_d, k = 10;
        std::uint64_t seed = 1;
        bool decoupled = false, no_timing = false;
    } swo;
    auto* sweep = app.add_subcommand("sweep", "Run a query sweep and emit a CSV");
    sweep->add_option("--index", swo.index, "index file (omit for a linear scan over --data)");
    sweep->add_option("--data", swo.data, "base vectors (.fvecs), linear scans only");
    sweep->add_option("--transform", swo.transform, "transform file used at build time")
        ->required();
    sweep->add_option("--calibration", swo.calibration, "calibration file (dade only)");
    sweep->add_option("--queries", swo.queries, "query vectors (.fvecs)")->required();
    sweep->add_option("--gt", swo.gt, "ground truth (.ivecs) enabling recall and failure rate");
    sweep->add_option("--dco", swo.dco, "fd, ads, dade, fixed-pca or fixed-random")
        ->check(CLI::IsMember({"fd", "ads", "dade", "fixed-pca", "fixed-random"}));
    sweep->add_option("--n-probe", swo.n_probe, "ivf probe grid (list or lo:hi:step)");
    sweep->add_option("--n-ef", swo.n_ef, "hnsw beam grid (list or lo:hi:step)");
    sweep->add_option("--d-fixed", swo.d_fixed, "fixed-dimension grid for linear sweeps");
    sweep->add_option("--eps0", swo.eps0, "ads threshold multiplier");
    sweep->add_option("--delta-d", swo.delta_d, "checkpoint stride");
    sweep->add_option("--k", swo.k, "neighbors per query");
    sweep->add_option("--seed", swo.seed, "seed recorded in the CSV");
    sweep->add_flag("--decoupled", swo.decoupled, "hnsw: decouple pruning radius from steering");
    sweep->add_flag("--no-timing", swo.no_timing, "leave timing columns empty (reproducible CSV)");
    sweep->add_option("--out", swo.out, "output CSV (default stdout)");
    sweep->callback([&] {
        const dade::OrthoTransform t = dade::OrthoTransform::load(swo.transform);
        const dade::VectorSet queries = dade::read_fvecs(swo.queries);

        dade::SweepSpec spec;
        spec.dco = *dade::parse_dco_kind(swo.dco);
        spec.n_probe = parse_grid_u32(swo.n_probe);
        spec.n_ef = parse_grid_u32(swo.n_ef);
        if (!swo.d_fixed.empty()) spec.d_fixed = parse_grid_u32(swo.d_fixed);
        spec.eps0 = swo.eps0;
        spec.delta_d = swo.delta_d;
        spec.k = swo.k;
        spec.seed = swo.seed;
        spec.decoupled = swo.decoupled;
        spec.timing = !swo.no_timing;

        dade::SweepContext ctx;
        ctx.transform = &t;
        ctx.queries = &queries;

        std::optional<dade::IvfIndex> ivf;
        std::optional<dade::HnswIndex> hnsw;
        std::optional<dade::VectorSet> base;
        if (swo.index.empty()) {
            if (swo.data.empty()) throw ConfigError("a linear sweep needs --data");
            spec.index_kind = dade::IndexKind::linear;
            base = dade::apply_transform(t, dade::read_fvecs(swo.data));
            ctx.data = &*base;
        } else {
            const std::string magic = sniff_magic(swo.index);
            if (magic == "DIVF") {
                spec.index_kind = dade::IndexKind::ivf;
                ivf = dade::IvfIndex::load(swo.index);
                ctx.ivf = &*ivf;
            } else if (magic == "DHNW") {
                spec.index_kind = dade::IndexKind::hnsw;
                hnsw = dade::HnswIndex::load(swo.index);
                ctx.hnsw = &*hnsw;
            } else {
                throw ConfigError(swo.index + " is not a recognized index file");
            }
        }

        std::optional<dade::CalibrationTable> table;
        if (!swo.calibration.empty()) {
            table = dade::CalibrationTable::load(swo.calibration);
            ctx.calibration = &*table;
        }
        std::optional<dade::GroundTruth> truth;
        if (!swo.gt.empty()) {
            truth = dade::read_ground_truth(swo.gt);
            ctx.gt = &*truth;
        }

        with_output(swo.out, [&](std::ostream& os) { dade::run_sweep(ctx, spec, os); });
    });

    // ---- feasibility ----
    struct {
        std::string data, queries, strategies, d_fixed, eps0_grid, p_s_grid, out;
        std::string delta_d = "32";
        std::uint32_t k = 10;
        std::uint64_t seed = 1, pairs = 0;
        bool no_timing = false;
    } fe;
    auto* feas = app.add_subcommand(
        "feasibility", "Linear-scan recall/dimension-fraction curves for all strategies");
    feas->add_option("--data", fe.data, "base vectors (.fvecs)")->required();
    feas->add_option("--queries", fe.queries, "query vectors (.fvecs)")->required();
    feas->add_option("--strategies", fe.strategies, "comma list (default all five)");
    feas->add_option("--d-fixed", fe.d_fixed, "fixed-dimension grid");
    feas->add_option("--eps0-grid", fe.eps0_grid, "ads multiplier grid (default 0.5:4:0.5)");
    feas->add_option("--p-s-grid", fe.p_s_grid, "failure probability grid (default 0.05:0.6:0.05)");
    feas->add_option("--delta-d", fe.delta_d, "checkpoint stride list");
    feas->add_option("--k", fe.k, "neighbors per query");
    feas->add_option("--seed", fe.seed, "rng seed");
    feas->add_option("--pairs", fe.pairs, "calibration pairs (0 = default rule)");
    feas->add_flag("--no-timing", fe.no_timing, "leave timing columns empty (reproducible CSV)");
    feas->add_option("--out", fe.out, "output CSV (default stdout)");
    feas->callback([&] {
        const dade::VectorSet data = dade::read_fvecs(fe.data);
        const dade::VectorSet queries = dade::read_fvecs(fe.queries);

        dade::FeasibilitySpec spec;
        if (!fe.strategies.empty()) {
            spec.strategies.clear();
            for (const std::string& tok : split_list(fe.strategies)) {
                const auto kind = dade::parse_dco_kind(tok);
                if (!kind) throw ConfigError("unknown strategy '" + tok + "'");
                spec.strategies.push_back(*kind);
            }
        }
        if (!fe.d_fixed.empty()) spec.d_fixed = parse_grid_u32(fe.d_fixed);
        if (!fe.eps0_grid.empty()) spec.eps0_grid = parse_grid_f64(fe.eps0_grid);
        if (!fe.p_s_grid.empty()) spec.p_s_grid = parse_grid_f64(fe.p_s_grid);
        spec.delta_d_list = parse_grid_u32(fe.delta_d);
        spec.k = fe.k;
        spec.seed = fe.seed;
        spec.calibration_pairs = fe.pairs;
        spec.timing = !fe.no_timing;

        with_output(fe.out, [&](std::ostream& os) { dade::run_feasibility(data, queries, spec, os); });
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
