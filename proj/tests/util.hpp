#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "dade/dataset_io.hpp"

namespace testutil {

// Unique scratch directory under the system temp root, removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("dade_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path file(const std::string& name) const { return path / name; }
};

// Small Gaussian cloud; alpha = 0 gives an isotropic spectrum.
inline dade::VectorSet gaussian_set(std::uint32_t count, std::uint32_t dim, std::uint64_t seed,
                                    double alpha = 0.0, bool rotate = false) {
    dade::SynthSpec spec;
    spec.count = count;
    spec.dim = dim;
    spec.seed = seed;
    if (alpha == 0.0) {
        spec.spectrum = dade::SynthSpec::Spectrum::uniform;
    } else {
        spec.spectrum = dade::SynthSpec::Spectrum::power;
        spec.alpha = alpha;
    }
    spec.rotate = rotate;
    return dade::make_synthetic(spec).data;
}

}  // namespace testutil
