#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dade/calibration.hpp"
#include "dade/dataset_io.hpp"
#include "dade/defaults.hpp"
#include "dade/hnsw.hpp"
#include "dade/ivf.hpp"
#include "dade/transform.hpp"

namespace dade {

enum class IndexKind : std::uint8_t { linear, ivf, hnsw };
enum class DcoKind : std::uint8_t { fd, ads, dade, fixed_pca, fixed_random };

const char* to_string(IndexKind k);
const char* to_string(DcoKind k);
std::optional<IndexKind> parse_index_kind(const std::string& s);
std::optional<DcoKind> parse_dco_kind(const std::string& s);

// One grid axis per index kind: n_probe for ivf, n_ef for hnsw, d_fixed for
// linear scans with a fixed-dimension estimator. Rows are emitted in grid
// order and are deterministic for a fixed seed; timing columns are left
// empty when timing is off so the CSV bytes reproduce exactly.
struct SweepSpec {
    IndexKind index_kind = IndexKind::ivf;
    DcoKind dco = DcoKind::fd;
    std::vector<std::uint32_t> n_probe;
    std::vector<std::uint32_t> n_ef;
    std::vector<std::uint32_t> d_fixed;
    double eps0 = defaults::adsampling_eps0;
    std::uint32_t delta_d = defaults::delta_d;
    std::uint32_t k = 10;
    std::uint64_t seed = 1;
    bool decoupled = false;  // hnsw only
    bool timing = true;
};

struct SweepContext {
    const IvfIndex* ivf = nullptr;
    const HnswIndex* hnsw = nullptr;
    const VectorSet* data = nullptr;               // transformed, linear scans only
    const OrthoTransform* transform = nullptr;     // always required
    const CalibrationTable* calibration = nullptr; // required for dade
    const VectorSet* queries = nullptr;            // raw; transformed internally
    const GroundTruth* gt = nullptr;               // enables recall and failure-rate columns
};

void run_sweep(const SweepContext& ctx, const SweepSpec& spec, std::ostream& out);

// Self-contained linear-scan comparison: fits both transform kinds on the
// data, computes ground truth, and traces recall / dimension-fraction
// curves for the requested strategies.
struct FeasibilitySpec {
    std::vector<DcoKind> strategies = {DcoKind::fd, DcoKind::fixed_random, DcoKind::fixed_pca,
                                       DcoKind::ads, DcoKind::dade};
    std::vector<std::uint32_t> d_fixed;          // empty -> dim/16, dim/8, dim/4, dim/2, dim
    std::vector<double> eps0_grid;               // empty -> 0.5 .. 4.0 step 0.5
    std::vector<double> p_s_grid;                // empty -> 0.05 .. 0.6 step 0.05
    std::vector<std::uint32_t> delta_d_list = {defaults::delta_d};
    std::uint32_t k = 10;
    std::uint64_t seed = 1;
    std::uint64_t calibration_pairs = 0;  // 0 -> default sizing rule
    bool timing = true;
};

void run_feasibility(const VectorSet& raw_data, const VectorSet& raw_queries,
                     const FeasibilitySpec& spec, std::ostream& out);

}  // namespace dade
