#include "dade/bench.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>

#include "dade/error.hpp"
#include "dade/estimator.hpp"

namespace dade {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string fmt_fixed(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

void emit_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i != 0) out << ',';
        out << cells[i];
    }
    out << '\n';
}

using QueryFn = std::function<SearchResult(const float*, DcoStats*)>;

struct RunMetrics {
    double recall = -1.0;       // negative -> column left empty
    double latency_us = -1.0;
    double qps = -1.0;
    double dim_fraction = 0.0;
    double failure_rate = -1.0;
};

// Runs every query once for timing and counters; when ground truth is
// present a second untimed pass measures the pruning failure rate so the
// exact-distance bookkeeping never pollutes the latency numbers.
RunMetrics measure(const QueryFn& search, const VectorSet& queries, const GroundTruth* gt,
                   bool timing, std::uint32_t dim) {
    DcoStats stats;
    std::vector<std::vector<std::uint32_t>> ids(queries.count);
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint32_t qi = 0; qi < queries.count; ++qi) {
        ids[qi] = search(queries.row(qi), &stats).ids();
    }
    const auto t1 = std::chrono::steady_clock::now();

    RunMetrics m;
    m.dim_fraction = stats.dim_fraction(dim);
    if (timing) {
        const double seconds = std::chrono::duration<double>(t1 - t0).count();
        m.latency_us = seconds * 1e6 / static_cast<double>(queries.count);
        m.qps = seconds > 0.0 ? static_cast<double>(queries.count) / seconds : 0.0;
    }
    if (gt != nullptr) {
        m.recall = recall(ids, *gt);
        DcoStats fstats;
        fstats.measure_failures = true;
        for (std::uint32_t qi = 0; qi < queries.count; ++qi) {
            search(queries.row(qi), &fstats);
        }
        m.failure_rate = fstats.failure_rate();
    }
    return m;
}

void require(bool cond, const char* msg) {
    if (!cond) throw ConfigError(msg);
}

std::unique_ptr<DcoStrategy> make_strategy(const SweepContext& ctx, const SweepSpec& spec,
                                           std::uint32_t d_fixed) {
    const OrthoTransform& t = *ctx.transform;
    switch (spec.dco) {
        case DcoKind::fd:
            return std::make_unique<FdScanningStrategy>(t.dim);
        case DcoKind::ads:
            require(t.kind == TransformKind::random,
                    "ads requires an index built on a random orthogonal transform");
            return std::make_unique<AdsamplingStrategy>(t.dim, spec.delta_d, spec.eps0);
        case DcoKind::dade:
            require(t.kind == TransformKind::pca, "dade requires an index built on a pca transform");
            require(ctx.calibration != nullptr, "dade requires a calibration table");
            return std::make_unique<DadeStrategy>(t, *ctx.calibration, spec.delta_d);
        case DcoKind::fixed_pca:
            require(t.kind == TransformKind::pca, "fixed-pca requires a pca transform");
            return std::make_unique<FixedDimStrategy>(t, d_fixed, ScaleRule::variance_ratio);
        case DcoKind::fixed_random:
            require(t.kind == TransformKind::random, "fixed-random requires a random transform");
            return std::make_unique<FixedDimStrategy>(t, d_fixed, ScaleRule::dimension_ratio);
    }
    throw ConfigError("unknown dco kind");
}

}  // namespace

const char* to_string(IndexKind k) {
    switch (k) {
        case IndexKind::linear: return "linear";
        case IndexKind::ivf: return "ivf";
        case IndexKind::hnsw: return "hnsw";
    }
    return "?";
}

const char* to_string(DcoKind k) {
    switch (k) {
        case DcoKind::fd: return "fd";
        case DcoKind::ads: return "ads";
        case DcoKind::dade: return "dade";
        case DcoKind::fixed_pca: return "fixed-pca";
        case DcoKind::fixed_random: return "fixed-random";
    }
    return "?";
}

std::optional<IndexKind> parse_index_kind(const std::string& s) {
    if (s == "linear") return IndexKind::linear;
    if (s == "ivf") return IndexKind::ivf;
    if (s == "hnsw") return IndexKind::hnsw;
    return std::nullopt;
}

std::optional<DcoKind> parse_dco_kind(const std::string& s) {
    if (s == "fd") return DcoKind::fd;
    if (s == "ads") return DcoKind::ads;
    if (s == "dade") return DcoKind::dade;
    if (s == "fixed-pca") return DcoKind::fixed_pca;
    if (s == "fixed-random") return DcoKind::fixed_random;
    return std::nullopt;
}

void run_sweep(const SweepContext& ctx, const SweepSpec& spec, std::ostream& out) {
    require(ctx.transform != nullptr, "sweep needs a transform");
    require(ctx.queries != nullptr, "sweep needs queries");
    const OrthoTransform& t = *ctx.transform;
    require(ctx.queries->dim == t.dim, "query dimensionality does not match the transform");
    if (ctx.gt != nullptr) {
        require(ctx.gt->k == spec.k, "ground truth was computed for a different k");
        require(ctx.gt->ids.size() == ctx.queries->count,
                "ground truth does not cover the query set");
    }

    const VectorSet queries_t = apply_transform(t, *ctx.queries);

    const bool fixed = spec.dco == DcoKind::fixed_pca || spec.dco == DcoKind::fixed_random;
    std::vector<std::uint32_t> grid;
    const char* param = "none";
    switch (spec.index_kind) {
        case IndexKind::ivf:
            require(ctx.ivf != nullptr, "sweep over ivf needs an ivf index");
            require(ctx.ivf->dim() == t.dim, "ivf index dimensionality does not match the transform");
            require(!spec.n_probe.empty(), "sweep over ivf needs an n_probe grid");
            grid = spec.n_probe;
            param = "n_probe";
            break;
        case IndexKind::hnsw:
            require(ctx.hnsw != nullptr, "sweep over hnsw needs an hnsw index");
            require(ctx.hnsw->dim() == t.dim, "hnsw index dimensionality does not match the transform");
            require(!spec.n_ef.empty(), "sweep over hnsw needs an n_ef grid");
            grid = spec.n_ef;
            param = "n_ef";
            break;
        case IndexKind::linear:
            require(ctx.data != nullptr, "linear sweep needs the transformed base vectors");
            require(ctx.data->dim == t.dim, "base vectors do not match the transform");
            if (fixed) {
                require(!spec.d_fixed.empty(), "fixed-dimension sweep needs a d_fixed grid");
                grid = spec.d_fixed;
                param = "d_fixed";
            } else {
                grid = {0};
            }
            break;
    }
    if (fixed && spec.index_kind != IndexKind::linear) {
        require(spec.d_fixed.size() == 1,
                "fixed-dimension strategies in an index sweep take exactly one d_fixed");
    }

    out << "# dade sweep v1\n";
    out << "index,layout,decoupled,dco,param,value,k,seed,recall,mean_latency_us,qps,"
           "dim_fraction,failure_rate\n";

    std::unique_ptr<DcoStrategy> strategy;
    if (!(fixed && spec.index_kind == IndexKind::linear)) {
        const std::uint32_t d0 = fixed ? spec.d_fixed.front() : 0;
        strategy = make_strategy(ctx, spec, d0);
    }

    for (const std::uint32_t value : grid) {
        if (fixed && spec.index_kind == IndexKind::linear) {
            strategy = make_strategy(ctx, spec, value);
        }
        const DcoStrategy& dco = *strategy;

        QueryFn search;
        std::string layout = "-";
        std::string decoupled = "-";
        switch (spec.index_kind) {
            case IndexKind::ivf:
                layout = ctx.ivf->layout() == IvfLayout::split ? "split" : "contiguous";
                search = [&, value](const float* q, DcoStats* stats) {
                    return ctx.ivf->search(q, spec.k, value, dco, stats);
                };
                break;
            case IndexKind::hnsw:
                decoupled = spec.decoupled ? "1" : "0";
                search = [&, value](const float* q, DcoStats* stats) {
                    return ctx.hnsw->search(q, spec.k, value, dco, spec.decoupled, stats);
                };
                break;
            case IndexKind::linear:
                search = [&](const float* q, DcoStats* stats) {
                    return linear_scan(*ctx.data, q, spec.k, dco, stats);
                };
                break;
        }

        const RunMetrics m = measure(search, queries_t, ctx.gt, spec.timing, t.dim);
        emit_row(out, {to_string(spec.index_kind), layout, decoupled, to_string(spec.dco), param,
                       std::to_string(value), std::to_string(spec.k), std::to_string(spec.seed),
                       m.recall < 0 ? "" : fmt_fixed(m.recall, 6),
                       m.latency_us < 0 ? "" : fmt_fixed(m.latency_us, 3),
                       m.qps < 0 ? "" : fmt_fixed(m.qps, 3), fmt_fixed(m.dim_fraction, 6),
                       m.failure_rate < 0 ? "" : fmt_fixed(m.failure_rate, 6)});
    }
}

void run_feasibility(const VectorSet& raw_data, const VectorSet& raw_queries,
                     const FeasibilitySpec& spec, std::ostream& out) {
    raw_data.validate();
    raw_queries.validate();
    require(raw_data.dim == raw_queries.dim, "data and query dimensionality differ");
    require(spec.k >= 1 && spec.k <= raw_data.count, "k must lie in [1, count]");
    const std::uint32_t dim = raw_data.dim;

    std::vector<std::uint32_t> d_fixed = spec.d_fixed;
    if (d_fixed.empty()) {
        for (std::uint32_t div : {16u, 8u, 4u, 2u, 1u}) {
            const std::uint32_t d = dim / div;
            if (d >= 1 && (d_fixed.empty() || d_fixed.back() != d)) d_fixed.push_back(d);
        }
    }
    std::vector<double> eps0_grid = spec.eps0_grid;
    if (eps0_grid.empty()) {
        for (double e = 0.5; e <= 4.0 + 1e-9; e += 0.5) eps0_grid.push_back(e);
    }
    std::vector<double> p_s_grid = spec.p_s_grid;
    if (p_s_grid.empty()) {
        for (double p = 0.05; p <= 0.6 + 1e-9; p += 0.05) p_s_grid.push_back(p);
    }
    const std::uint64_t n_pairs = spec.calibration_pairs != 0
                                      ? spec.calibration_pairs
                                      : defaults::calibration_pairs(raw_data.count);

    const GroundTruth gt = compute_ground_truth(raw_data, raw_queries, spec.k);

    const OrthoTransform pca = fit_pca(raw_data);
    const OrthoTransform rnd = fit_random_orthogonal(dim, spec.seed, raw_data);
    const VectorSet data_pca = apply_transform(pca, raw_data);
    const VectorSet queries_pca = apply_transform(pca, raw_queries);
    const VectorSet data_rnd = apply_transform(rnd, raw_data);
    const VectorSet queries_rnd = apply_transform(rnd, raw_queries);

    out << "# dade feasibility v1\n";
    out << "strategy,delta_d,param,value,k,seed,recall,dim_fraction,mean_latency_us,qps\n";

    const auto scan_row = [&](DcoKind kind, std::uint32_t delta_d, const char* param, double value,
                              const VectorSet& data, const VectorSet& queries,
                              const DcoStrategy& dco) {
        const QueryFn search = [&](const float* q, DcoStats* stats) {
            return linear_scan(data, q, spec.k, dco, stats);
        };
        const RunMetrics m = measure(search, queries, &gt, spec.timing, dim);
        emit_row(out, {to_string(kind), std::to_string(delta_d), param, fmt(value),
                       std::to_string(spec.k), std::to_string(spec.seed), fmt_fixed(m.recall, 6),
                       fmt_fixed(m.dim_fraction, 6), m.latency_us < 0 ? "" : fmt_fixed(m.latency_us, 3),
                       m.qps < 0 ? "" : fmt_fixed(m.qps, 3)});
    };

    for (const DcoKind kind : spec.strategies) {
        switch (kind) {
            case DcoKind::fd: {
                FdScanningStrategy dco(dim);
                scan_row(kind, 0, "none", 0.0, data_pca, queries_pca, dco);
                break;
            }
            case DcoKind::fixed_pca:
                for (const std::uint32_t d : d_fixed) {
                    FixedDimStrategy dco(pca, d, ScaleRule::variance_ratio);
                    scan_row(kind, 0, "d_fixed", d, data_pca, queries_pca, dco);
                }
                break;
            case DcoKind::fixed_random:
                for (const std::uint32_t d : d_fixed) {
                    FixedDimStrategy dco(rnd, d, ScaleRule::dimension_ratio);
                    scan_row(kind, 0, "d_fixed", d, data_rnd, queries_rnd, dco);
                }
                break;
            case DcoKind::ads:
                for (const std::uint32_t dd : spec.delta_d_list) {
                    for (const double eps0 : eps0_grid) {
                        AdsamplingStrategy dco(dim, dd, eps0);
                        scan_row(kind, dd, "eps0", eps0, data_rnd, queries_rnd, dco);
                    }
                }
                break;
            case DcoKind::dade:
                for (const std::uint32_t dd : spec.delta_d_list) {
                    for (const double p_s : p_s_grid) {
                        const CalibrationTable cal =
                            calibrate(pca, data_pca, p_s, dd, n_pairs, spec.seed);
                        DadeStrategy dco(pca, cal, dd);
                        scan_row(kind, dd, "p_s", p_s, data_pca, queries_pca, dco);
                    }
                }
                break;
        }
    }
}

}  // namespace dade
