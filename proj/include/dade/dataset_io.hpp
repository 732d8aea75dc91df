#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <vector>

#include "dade/vector_set.hpp"

namespace dade {

// .fvecs / .ivecs: each record is a little-endian int32 dimension followed
// by that many float32 / int32 payload values. All records in one file
// share the dimension.
VectorSet read_fvecs(const std::filesystem::path& path);
void write_fvecs(const std::filesystem::path& path, const VectorSet& data);

std::vector<std::vector<std::int32_t>> read_ivecs(const std::filesystem::path& path);
void write_ivecs(const std::filesystem::path& path,
                 const std::vector<std::vector<std::int32_t>>& records);

struct GroundTruth {
    std::uint32_t k = 0;
    std::vector<std::vector<std::uint32_t>> ids;  // per query, ascending (distance, id)
};

// Exhaustive K nearest neighbors with 64-bit accumulation.
GroundTruth compute_ground_truth(const VectorSet& data, const VectorSet& queries, std::uint32_t k);

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth read_ground_truth(const std::filesystem::path& path);

// Mean fraction of true neighbors recovered, id-set intersection per query.
double recall(const std::vector<std::vector<std::uint32_t>>& result, const GroundTruth& truth);

// Seeded anisotropic Gaussian generator. Component k of the latent draw has
// variance spectrum[k]; an optional random rotation hides the axes so a
// fitted basis has to find them.
struct SynthSpec {
    std::uint32_t count = 0;
    std::uint32_t dim = 0;
    std::uint32_t query_count = 0;
    std::uint64_t seed = 1;

    enum class Spectrum : std::uint8_t { power, uniform, values };
    Spectrum spectrum = Spectrum::power;
    double alpha = 1.0;              // power: variance_k = k^-alpha
    std::vector<double> values;      // explicit per-component variances
    bool rotate = true;
    double mean_shift = 0.0;         // added to every component
};

// Key = value lines, '#' starts a comment. count and dim are required.
SynthSpec parse_synth_spec(std::istream& in);
SynthSpec load_synth_spec(const std::filesystem::path& path);

std::vector<double> synth_spectrum(const SynthSpec& spec);

struct SynthDataset {
    VectorSet data;
    VectorSet queries;  // empty when query_count == 0
};

SynthDataset make_synthetic(const SynthSpec& spec);

}  // namespace dade
