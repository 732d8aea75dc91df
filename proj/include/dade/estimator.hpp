#pragma once

#include <cstdint>
#include <vector>

#include "dade/calibration.hpp"
#include "dade/distance.hpp"
#include "dade/transform.hpp"

namespace dade {

// Result of one distance-comparison operation against threshold r.
// distance is the exact Euclidean distance when distance_exact is set
// (always the case for accepted candidates); for candidates rejected before
// the full dimension it is the last scaled estimate, kept so a caller can
// still order pruned candidates.
struct DcoOutcome {
    bool pruned = false;
    float distance = 0.0f;
    bool distance_exact = true;
    std::uint32_t dims_used = 0;
};

struct DcoStats {
    std::uint64_t total_dco = 0;
    std::uint64_t dims_accumulated = 0;

    // Failure accounting doubles the work per call (it needs the exact
    // distance even for rejected candidates), so it is opt-in.
    bool measure_failures = false;
    std::uint64_t eligible = 0;  // calls whose exact distance was <= r
    std::uint64_t failures = 0;  // rejected despite exact distance <= r

    void merge(const DcoStats& o) {
        total_dco += o.total_dco;
        dims_accumulated += o.dims_accumulated;
        eligible += o.eligible;
        failures += o.failures;
    }
    double dim_fraction(std::uint32_t dim) const {
        if (total_dco == 0) return 0.0;
        return static_cast<double>(dims_accumulated) /
               (static_cast<double>(total_dco) * static_cast<double>(dim));
    }
    double failure_rate() const {
        if (eligible == 0) return 0.0;
        return static_cast<double>(failures) / static_cast<double>(eligible);
    }
};

// Squared distance restricted to components [lo, hi), 0 <= lo < hi <= dim.
float partial_sqdist(const float* o, const float* q, std::uint32_t dim, std::uint32_t lo,
                     std::uint32_t hi);

// Variance-ratio unbiased squared-distance estimate from the first d
// components: lambda_prefix[dim]/lambda_prefix[d] * partial_sq. Falls back
// to scale 1 when the prefix variance is zero; *degenerate reports that.
double dade_estimate(const OrthoTransform& t, double partial_sq, std::uint32_t d,
                     bool* degenerate = nullptr);

// Dimension-ratio estimate for a random basis: dim/d * partial_sq.
double adsampling_estimate(double partial_sq, std::uint32_t d, std::uint32_t dim);

class DcoStrategy {
public:
    virtual ~DcoStrategy() = default;
    virtual DcoOutcome evaluate(SplitView o, const float* q, float r,
                                DcoStats* stats = nullptr) const = 0;
    virtual std::uint32_t dim() const = 0;

    DcoOutcome evaluate(const float* o, const float* q, float r, DcoStats* stats = nullptr) const {
        return evaluate(SplitView::contiguous(o, dim()), q, r, stats);
    }
};

// Plain full scan: exact distance, prune iff it exceeds r.
class FdScanningStrategy final : public DcoStrategy {
public:
    explicit FdScanningStrategy(std::uint32_t dim) : dim_(dim) {}
    DcoOutcome evaluate(SplitView o, const float* q, float r, DcoStats* stats) const override;
    using DcoStrategy::evaluate;
    std::uint32_t dim() const override { return dim_; }

private:
    std::uint32_t dim_;
};

// Incremental scan over a variance-ordered basis. At each checkpoint d the
// partial sum is scaled by the variance ratio and tested against
// (1 + epsilon_d) * r; survivors of all checkpoints get an exact comparison
// at the full dimension. Construction validates that the calibration table
// matches the transform dimension and step.
class DadeStrategy final : public DcoStrategy {
public:
    DadeStrategy(const OrthoTransform& t, const CalibrationTable& cal, std::uint32_t delta_d);
    DcoOutcome evaluate(SplitView o, const float* q, float r, DcoStats* stats) const override;
    using DcoStrategy::evaluate;
    std::uint32_t dim() const override { return dim_; }

private:
    std::uint32_t dim_;
    std::vector<std::uint32_t> checkpoints_;
    std::vector<double> reject_coeff_;  // reject iff partial > coeff * r^2
    std::vector<double> est_scale_;     // scale for the reported estimate
};

// Incremental scan over a random basis with the distance-concentration
// threshold (1 + eps0/sqrt(d)) * r and the dim/d estimate.
class AdsamplingStrategy final : public DcoStrategy {
public:
    AdsamplingStrategy(std::uint32_t dim, std::uint32_t delta_d, double eps0);
    DcoOutcome evaluate(SplitView o, const float* q, float r, DcoStats* stats) const override;
    using DcoStrategy::evaluate;
    std::uint32_t dim() const override { return dim_; }

private:
    std::uint32_t dim_;
    std::vector<std::uint32_t> checkpoints_;
    std::vector<double> reject_coeff_;
    std::vector<double> est_scale_;
};

enum class ScaleRule : std::uint8_t {
    variance_ratio,   // lambda_prefix[dim]/lambda_prefix[d]
    dimension_ratio,  // dim/d
};

// One-shot estimate from a fixed number of leading components; no exact
// confirmation pass, so accepted distances are estimates unless d == dim.
class FixedDimStrategy final : public DcoStrategy {
public:
    FixedDimStrategy(const OrthoTransform& t, std::uint32_t d_fixed, ScaleRule rule);
    DcoOutcome evaluate(SplitView o, const float* q, float r, DcoStats* stats) const override;
    using DcoStrategy::evaluate;
    std::uint32_t dim() const override { return dim_; }

private:
    std::uint32_t dim_;
    std::uint32_t d_fixed_;
    double scale_;
};

// Free-function spellings of the strategies, one call each.
DcoOutcome fd_scanning_dco(const float* o, const float* q, std::uint32_t dim, float r,
                           DcoStats* stats = nullptr);
DcoOutcome dade_dco(SplitView o, const float* q, float r, const OrthoTransform& t,
                    const CalibrationTable& cal, std::uint32_t delta_d, DcoStats* stats = nullptr);
DcoOutcome adsampling_dco(SplitView o, const float* q, std::uint32_t dim, float r,
                          std::uint32_t delta_d, double eps0, DcoStats* stats = nullptr);
DcoOutcome fixed_dim_dco(SplitView o, const float* q, float r, const OrthoTransform& t,
                         std::uint32_t d_fixed, ScaleRule rule, DcoStats* stats = nullptr);

}  // namespace dade
