#include "dade/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dade/error.hpp"

namespace dade {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void record(DcoStats* stats, const DcoOutcome& out) {
    if (!stats) return;
    ++stats->total_dco;
    stats->dims_accumulated += out.dims_used;
}

// Exact distance for failure accounting, continuing the scan's own
// accumulator so the value matches what a full scan would have produced.
void record_failure_check(DcoStats* stats, const DcoOutcome& out, float acc, std::uint32_t reached,
                          SplitView o, const float* q, std::uint32_t dim, float r) {
    if (!stats || !stats->measure_failures) return;
    accumulate_sqdist(acc, o, q, reached, dim);
    const float exact = std::sqrt(acc);
    if (exact <= r) {
        ++stats->eligible;
        if (out.pruned) ++stats->failures;
    }
}

// Shared checkpointed scan. reject_coeff[i] compares against the raw
// partial sum (reject iff partial > coeff * r^2, the squared form of
// dis' > (1 + eps) * r); est_scale[i] turns the partial sum into the
// squared-distance estimate reported for rejected candidates.
DcoOutcome checkpointed_scan(SplitView o, const float* q, std::uint32_t dim, float r,
                             const std::vector<std::uint32_t>& checkpoints,
                             const std::vector<double>& reject_coeff,
                             const std::vector<double>& est_scale, DcoStats* stats) {
    const double r2 = static_cast<double>(r) * static_cast<double>(r);
    float acc = 0.0f;
    std::uint32_t prev = 0;
    for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
        const std::uint32_t d = checkpoints[ci];
        accumulate_sqdist(acc, o, q, prev, d);
        prev = d;
        if (static_cast<double>(acc) > reject_coeff[ci] * r2) {
            DcoOutcome out;
            out.pruned = true;
            out.distance = static_cast<float>(std::sqrt(est_scale[ci] * static_cast<double>(acc)));
            out.distance_exact = false;
            out.dims_used = d;
            record(stats, out);
            record_failure_check(stats, out, acc, d, o, q, dim, r);
            return out;
        }
    }
    accumulate_sqdist(acc, o, q, prev, dim);
    DcoOutcome out;
    out.distance = std::sqrt(acc);
    out.distance_exact = true;
    out.pruned = out.distance > r;
    out.dims_used = dim;
    record(stats, out);
    record_failure_check(stats, out, acc, dim, o, q, dim, r);
    return out;
}

}  // namespace

float partial_sqdist(const float* o, const float* q, std::uint32_t dim, std::uint32_t lo,
                     std::uint32_t hi) {
    if (lo >= hi || hi > dim)
        throw InvalidInput("partial_sqdist: need 0 <= lo < hi <= dim, got [" + std::to_string(lo) +
                           ", " + std::to_string(hi) + ") with dim " + std::to_string(dim));
    float acc = 0.0f;
    accumulate_sqdist(acc, SplitView::contiguous(o, dim), q, lo, hi);
    return acc;
}

double dade_estimate(const OrthoTransform& t, double partial_sq, std::uint32_t d,
                     bool* degenerate) {
    if (d == 0 || d > t.dim) throw InvalidInput("dade_estimate: d out of range");
    if (partial_sq < 0.0) throw InvalidInput("dade_estimate: negative partial");
    const bool degen = !t.scale_defined(d);
    if (degenerate) *degenerate = degen;
    return t.scale_factor(d) * partial_sq;
}

double adsampling_estimate(double partial_sq, std::uint32_t d, std::uint32_t dim) {
    if (d == 0 || d > dim) throw InvalidInput("adsampling_estimate: d out of range");
    if (partial_sq < 0.0) throw InvalidInput("adsampling_estimate: negative partial");
    return static_cast<double>(dim) / static_cast<double>(d) * partial_sq;
}

DcoOutcome FdScanningStrategy::evaluate(SplitView o, const float* q, float r,
                                        DcoStats* stats) const {
    float acc = 0.0f;
    accumulate_sqdist(acc, o, q, 0, dim_);
    DcoOutcome out;
    out.distance = std::sqrt(acc);
    out.distance_exact = true;
    out.pruned = out.distance > r;
    out.dims_used = dim_;
    record(stats, out);
    if (stats && stats->measure_failures && out.distance <= r) {
        ++stats->eligible;  // full scan never misjudges, so no failure branch
    }
    return out;
}

DadeStrategy::DadeStrategy(const OrthoTransform& t, const CalibrationTable& cal,
                           std::uint32_t delta_d)
    : dim_(t.dim) {
    if (delta_d == 0) throw InvalidInput("DadeStrategy: delta_d must be positive");
    if (cal.delta_d != delta_d)
        throw ConfigError("calibration step " + std::to_string(cal.delta_d) +
                          " does not match requested step " + std::to_string(delta_d));
    const auto expected = CalibrationTable::expected_checkpoints(t.dim, delta_d);
    if (cal.checkpoints != expected || cal.epsilons.size() != expected.size()) {
        std::string missing = "calibration table does not cover checkpoints for dim " +
                              std::to_string(t.dim) + " step " + std::to_string(delta_d);
        for (const std::uint32_t d : expected)
            if (std::find(cal.checkpoints.begin(), cal.checkpoints.end(), d) ==
                cal.checkpoints.end()) {
                missing += "; first missing checkpoint " + std::to_string(d);
                break;
            }
        throw ConfigError(missing);
    }

    checkpoints_ = cal.checkpoints;
    reject_coeff_.resize(checkpoints_.size());
    est_scale_.resize(checkpoints_.size());
    for (std::size_t ci = 0; ci < checkpoints_.size(); ++ci) {
        const std::uint32_t d = checkpoints_[ci];
        const double one_plus_eps = 1.0 + cal.epsilons[ci];
        if (!t.scale_defined(d)) {
            // Zero captured variance says nothing about the full distance;
            // never reject at such a checkpoint.
            reject_coeff_[ci] = kInf;
            est_scale_[ci] = 1.0;
        } else {
            const double scale = t.scale_factor(d);
            reject_coeff_[ci] = one_plus_eps * one_plus_eps / scale;
            est_scale_[ci] = scale;
        }
    }
}

DcoOutcome DadeStrategy::evaluate(SplitView o, const float* q, float r, DcoStats* stats) const {
    return checkpointed_scan(o, q, dim_, r, checkpoints_, reject_coeff_, est_scale_, stats);
}

AdsamplingStrategy::AdsamplingStrategy(std::uint32_t dim, std::uint32_t delta_d, double eps0)
    : dim_(dim) {
    if (dim == 0) throw InvalidInput("AdsamplingStrategy: dim must be positive");
    if (delta_d == 0) throw InvalidInput("AdsamplingStrategy: delta_d must be positive");
    if (eps0 < 0.0) throw InvalidInput("AdsamplingStrategy: eps0 must be nonnegative");
    checkpoints_ = CalibrationTable::expected_checkpoints(dim, delta_d);
    reject_coeff_.resize(checkpoints_.size());
    est_scale_.resize(checkpoints_.size());
    for (std::size_t ci = 0; ci < checkpoints_.size(); ++ci) {
        const double d = checkpoints_[ci];
        const double one_plus_eps = 1.0 + eps0 / std::sqrt(d);
        reject_coeff_[ci] = d / dim * one_plus_eps * one_plus_eps;
        est_scale_[ci] = dim / d;
    }
}

DcoOutcome AdsamplingStrategy::evaluate(SplitView o, const float* q, float r,
                                        DcoStats* stats) const {
    return checkpointed_scan(o, q, dim_, r, checkpoints_, reject_coeff_, est_scale_, stats);
}

FixedDimStrategy::FixedDimStrategy(const OrthoTransform& t, std::uint32_t d_fixed, ScaleRule rule)
    : dim_(t.dim), d_fixed_(d_fixed) {
    if (d_fixed == 0 || d_fixed > t.dim) throw InvalidInput("FixedDimStrategy: d_fixed out of range");
    scale_ = rule == ScaleRule::variance_ratio
                 ? t.scale_factor(d_fixed)
                 : static_cast<double>(t.dim) / static_cast<double>(d_fixed);
}

DcoOutcome FixedDimStrategy::evaluate(SplitView o, const float* q, float r,
                                      DcoStats* stats) const {
    float acc = 0.0f;
    accumulate_sqdist(acc, o, q, 0, d_fixed_);
    DcoOutcome out;
    out.distance = static_cast<float>(std::sqrt(scale_ * static_cast<double>(acc)));
    out.distance_exact = d_fixed_ == dim_;
    out.pruned = out.distance > r;
    out.dims_used = d_fixed_;
    record(stats, out);
    record_failure_check(stats, out, acc, d_fixed_, o, q, dim_, r);
    return out;
}

DcoOutcome fd_scanning_dco(const float* o, const float* q, std::uint32_t dim, float r,
                           DcoStats* stats) {
    return FdScanningStrategy(dim).evaluate(o, q, r, stats);
}

DcoOutcome dade_dco(SplitView o, const float* q, float r, const OrthoTransform& t,
                    const CalibrationTable& cal, std::uint32_t delta_d, DcoStats* stats) {
    return DadeStrategy(t, cal, delta_d).evaluate(o, q, r, stats);
}

DcoOutcome adsampling_dco(SplitView o, const float* q, std::uint32_t dim, float r,
                          std::uint32_t delta_d, double eps0, DcoStats* stats) {
    return AdsamplingStrategy(dim, delta_d, eps0).evaluate(o, q, r, stats);
}

DcoOutcome fixed_dim_dco(SplitView o, const float* q, float r, const OrthoTransform& t,
                         std::uint32_t d_fixed, ScaleRule rule, DcoStats* stats) {
    return FixedDimStrategy(t, d_fixed, rule).evaluate(o, q, r, stats);
}

}  // namespace dade
