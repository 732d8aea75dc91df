#include "dade/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "dade/detail/binary_io.hpp"
#include "dade/distance.hpp"
#include "dade/error.hpp"
#include "dade/rng.hpp"

namespace dade {

namespace {

struct CheckpointRatios {
    std::vector<std::uint32_t> checkpoints;
    std::vector<std::vector<double>> ratios;  // per checkpoint, one entry per kept pair
    std::uint64_t skipped = 0;                // pairs at exactly zero distance
};

// Walks each pair once, recording sqrt(scale_d * partial_d)/dis - 1 at every
// checkpoint. The single running accumulator matches the scan's own
// arithmetic, so calibration sees exactly the estimates the scan will see.
CheckpointRatios collect_ratios(const OrthoTransform& t, const VectorSet& data,
                                std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs,
                                std::uint32_t delta_d) {
    if (data.dim != t.dim) throw InvalidInput("calibration: data dim does not match transform");
    CheckpointRatios out;
    out.checkpoints = CalibrationTable::expected_checkpoints(t.dim, delta_d);
    out.ratios.resize(out.checkpoints.size());
    for (auto& r : out.ratios) r.reserve(pairs.size());

    std::vector<double> scale(out.checkpoints.size());
    for (std::size_t ci = 0; ci < out.checkpoints.size(); ++ci)
        scale[ci] = t.scale_factor(out.checkpoints[ci]);

    std::vector<float> partial(out.checkpoints.size());
    for (const auto& [i, j] : pairs) {
        const SplitView a = SplitView::contiguous(data.row(i), data.dim);
        const float* b = data.row(j);
        float acc = 0.0f;
        std::uint32_t prev = 0;
        for (std::size_t ci = 0; ci < out.checkpoints.size(); ++ci) {
            accumulate_sqdist(acc, a, b, prev, out.checkpoints[ci]);
            partial[ci] = acc;
            prev = out.checkpoints[ci];
        }
        accumulate_sqdist(acc, a, b, prev, data.dim);
        if (acc == 0.0f) {
            ++out.skipped;
            continue;
        }
        const double dis = std::sqrt(static_cast<double>(acc));
        for (std::size_t ci = 0; ci < out.checkpoints.size(); ++ci) {
            const double est = std::sqrt(scale[ci] * static_cast<double>(partial[ci]));
            out.ratios[ci].push_back(est / dis - 1.0);
        }
    }
    return out;
}

}  // namespace

double CalibrationTable::epsilon_at(std::uint32_t d) const {
    const auto it = std::lower_bound(checkpoints.begin(), checkpoints.end(), d);
    if (it == checkpoints.end() || *it != d)
        throw ConfigError("calibration table has no entry for checkpoint " + std::to_string(d));
    return epsilons[static_cast<std::size_t>(it - checkpoints.begin())];
}

std::vector<std::uint32_t> CalibrationTable::expected_checkpoints(std::uint32_t dim,
                                                                  std::uint32_t delta_d) {
    if (delta_d == 0) throw InvalidInput("delta_d must be positive");
    std::vector<std::uint32_t> cps;
    for (std::uint64_t d = delta_d; d + 1 <= dim && d < dim; d += delta_d)
        cps.push_back(static_cast<std::uint32_t>(d));
    return cps;
}

CalibrationTable CalibrationTable::unbounded(std::uint32_t dim, std::uint32_t delta_d) {
    CalibrationTable cal;
    cal.p_s = 0.0;
    cal.delta_d = delta_d;
    cal.checkpoints = expected_checkpoints(dim, delta_d);
    cal.epsilons.assign(cal.checkpoints.size(), std::numeric_limits<double>::infinity());
    return cal;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_pairs(const VectorSet& data,
                                                                  std::uint64_t n_pairs,
                                                                  std::uint64_t seed) {
    data.validate();
    if (data.count < 2) throw InvalidInput("sample_pairs: need at least 2 vectors");
    std::mt19937_64 gen(seed);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    pairs.reserve(n_pairs);
    for (std::uint64_t p = 0; p < n_pairs; ++p) {
        const auto i = static_cast<std::uint32_t>(rng::bounded(gen, data.count));
        auto j = static_cast<std::uint32_t>(rng::bounded(gen, data.count - 1));
        if (j >= i) ++j;
        pairs.emplace_back(i, j);
    }
    return pairs;
}

CalibrationTable calibrate(const OrthoTransform& t, const VectorSet& transformed_data, double p_s,
                           std::uint32_t delta_d, std::uint64_t n_pairs, std::uint64_t seed) {
    if (!(p_s > 0.0 && p_s < 1.0)) throw InvalidInput("calibrate: p_s must be in (0, 1)");
    if (n_pairs == 0) throw InvalidInput("calibrate: n_pairs must be positive");

    const auto pairs = sample_pairs(transformed_data, n_pairs, seed);
    CheckpointRatios col = collect_ratios(t, transformed_data, pairs, delta_d);

    CalibrationTable cal;
    cal.p_s = p_s;
    cal.delta_d = delta_d;
    cal.checkpoints = std::move(col.checkpoints);
    cal.sample_count = pairs.size() - col.skipped;

    if (!cal.checkpoints.empty()) {
        if (col.skipped * 2 > pairs.size())
            throw std::runtime_error("calibrate: over half the sampled pairs are at zero "
                                     "distance; data is too degenerate to calibrate");
        if (cal.sample_count == 0)
            throw std::runtime_error("calibrate: no usable pairs");

        cal.epsilons.resize(cal.checkpoints.size());
        const std::uint64_t n = cal.sample_count;
        // 1-based order statistic at ceil((1 - p_s) * n); no interpolation.
        const auto rank = static_cast<std::uint64_t>(std::ceil((1.0 - p_s) * static_cast<double>(n)));
        for (std::size_t ci = 0; ci < cal.checkpoints.size(); ++ci) {
            auto& r = col.ratios[ci];
            std::sort(r.begin(), r.end());
            cal.epsilons[ci] = r[rank - 1];
        }
        // A later checkpoint sees more of the distance, so its true tolerance
        // cannot exceed an earlier one; clip noisy late inflation with a
        // running minimum.
        for (std::size_t ci = 1; ci < cal.epsilons.size(); ++ci)
            cal.epsilons[ci] = std::min(cal.epsilons[ci], cal.epsilons[ci - 1]);
    }
    return cal;
}

std::vector<double> validate_calibration(
    const CalibrationTable& cal, const OrthoTransform& t, const VectorSet& transformed_data,
    std::span<const std::pair<std::uint32_t, std::uint32_t>> holdout_pairs) {
    CheckpointRatios col = collect_ratios(t, transformed_data, holdout_pairs, cal.delta_d);
    if (col.checkpoints != cal.checkpoints)
        throw ConfigError("validate_calibration: table checkpoints do not match data dimension");
    std::vector<double> exceedance(cal.checkpoints.size(), 0.0);
    for (std::size_t ci = 0; ci < cal.checkpoints.size(); ++ci) {
        const auto& r = col.ratios[ci];
        if (r.empty()) continue;
        std::uint64_t over = 0;
        for (const double x : r)
            if (x > cal.epsilons[ci]) ++over;
        exceedance[ci] = static_cast<double>(over) / static_cast<double>(r.size());
    }
    return exceedance;
}

std::vector<double> checkpoint_ratio_quantile(
    const OrthoTransform& t, const VectorSet& transformed_data,
    std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs, std::uint32_t delta_d,
    double level) {
    if (!(level >= 0.0 && level <= 1.0)) throw InvalidInput("quantile level must be in [0, 1]");
    CheckpointRatios col = collect_ratios(t, transformed_data, pairs, delta_d);
    std::vector<double> out(col.checkpoints.size());
    for (std::size_t ci = 0; ci < col.checkpoints.size(); ++ci) {
        auto& r = col.ratios[ci];
        if (r.empty()) throw std::runtime_error("no usable pairs for quantile");
        std::sort(r.begin(), r.end());
        const auto idx = std::min(r.size() - 1,
                                  static_cast<std::size_t>(level * static_cast<double>(r.size())));
        out[ci] = r[idx];
    }
    return out;
}

void CalibrationTable::save(const std::filesystem::path& path) const {
    auto out = detail::open_output(path);
    detail::write_pod(out, p_s);
    detail::write_pod(out, delta_d);
    detail::write_pod(out, static_cast<std::uint32_t>(checkpoints.size()));
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        detail::write_pod(out, checkpoints[i]);
        detail::write_pod(out, epsilons[i]);
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

CalibrationTable CalibrationTable::load(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    CalibrationTable cal;
    cal.p_s = detail::read_pod<double>(in, "p_s");
    cal.delta_d = detail::read_pod<std::uint32_t>(in, "delta_d");
    const auto n = detail::read_pod<std::uint32_t>(in, "checkpoint count");
    cal.checkpoints.resize(n);
    cal.epsilons.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        cal.checkpoints[i] = detail::read_pod<std::uint32_t>(in, "checkpoint");
        cal.epsilons[i] = detail::read_pod<double>(in, "epsilon");
    }
    for (std::uint32_t i = 0; i + 1 < n; ++i)
        if (cal.checkpoints[i] >= cal.checkpoints[i + 1])
            throw std::runtime_error("calibration checkpoints not ascending");
    return cal;
}

}  // namespace dade
