#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "dade/transform.hpp"
#include "dade/vector_set.hpp"

namespace dade {

// Per-checkpoint relative overestimation tolerances for the adaptive
// variance-scaled scan. epsilons[i] is the empirical (1 - p_s) quantile of
// dis'(checkpoint)/dis - 1 over sampled data pairs, smoothed to be
// nonincreasing. A scan rejects a candidate at checkpoint d when the
// estimated distance exceeds (1 + epsilon_at(d)) * threshold, so p_s bounds
// the per-checkpoint probability of discarding a true neighbor.
struct CalibrationTable {
    double p_s = 0.0;
    std::uint32_t delta_d = 0;
    std::vector<std::uint32_t> checkpoints;  // ascending multiples of delta_d, all < dim
    std::vector<double> epsilons;            // one per checkpoint
    std::uint64_t sample_count = 0;          // pairs used; informational, not persisted

    double epsilon_at(std::uint32_t d) const;  // ConfigError when d is not a checkpoint

    // Multiples of delta_d in [1, dim - 1]; empty when delta_d >= dim.
    static std::vector<std::uint32_t> expected_checkpoints(std::uint32_t dim,
                                                           std::uint32_t delta_d);

    // Degenerate limit p_s -> 0: every epsilon is +infinity, so rejection
    // before the full dimension is impossible and the scan reduces to a
    // plain full scan.
    static CalibrationTable unbounded(std::uint32_t dim, std::uint32_t delta_d);

    void save(const std::filesystem::path& path) const;
    static CalibrationTable load(const std::filesystem::path& path);
};

// n_pairs index pairs (i, j), i != j, uniform over ordered pairs.
std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_pairs(const VectorSet& data,
                                                                  std::uint64_t n_pairs,
                                                                  std::uint64_t seed);

// Fits a table on already-transformed data. Pairs at zero distance carry no
// ratio information and are skipped; more than half skipped is an error.
CalibrationTable calibrate(const OrthoTransform& t, const VectorSet& transformed_data, double p_s,
                           std::uint32_t delta_d, std::uint64_t n_pairs, std::uint64_t seed);

// Fraction of holdout pairs whose ratio exceeds the stored epsilon, one
// entry per checkpoint. Fresh pairs should exceed at rate about p_s.
std::vector<double> validate_calibration(
    const CalibrationTable& cal, const OrthoTransform& t, const VectorSet& transformed_data,
    std::span<const std::pair<std::uint32_t, std::uint32_t>> holdout_pairs);

// Diagnostic: per-checkpoint empirical quantile of the ratio distribution at
// an arbitrary level (no smoothing, no index rounding rule).
std::vector<double> checkpoint_ratio_quantile(
    const OrthoTransform& t, const VectorSet& transformed_data,
    std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs, std::uint32_t delta_d,
    double level);

}  // namespace dade
