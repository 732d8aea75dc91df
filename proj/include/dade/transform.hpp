#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dade/vector_set.hpp"

namespace dade {

struct CovarianceResult {
    std::vector<double> mean;  // D
    std::vector<double> cov;   // D x D row-major, 1/N normalization on centered data
};

// Requires at least two vectors.
CovarianceResult compute_covariance(const VectorSet& data);

struct EigenDecomposition {
    std::vector<double> values;   // unordered, matrix diagonal after convergence
    std::vector<double> vectors;  // D x D column-major, column k pairs with values[k]
    std::uint32_t sweeps = 0;
};

// Cyclic Jacobi rotations on a symmetric matrix (row-major, n x n).
// Converged when the off-diagonal Frobenius norm drops below 1e-10 * trace;
// throws std::runtime_error after 100 sweeps.
EigenDecomposition jacobi_eigendecomposition(const std::vector<double>& sym, std::uint32_t n);

// Column-major orthogonal dim x dim matrix: Gram-Schmidt applied to a
// seeded Gaussian draw, deterministic for a fixed seed.
std::vector<double> random_orthogonal(std::uint32_t dim, std::uint64_t seed);

enum class TransformKind : std::uint8_t { pca = 0, random = 1 };

// Orthogonal change of basis fitted on a dataset. Column k of the matrix is
// the direction whose projected data variance is eigenvalues[k]; columns are
// ordered by nonincreasing variance for both kinds so that the same
// variance-ratio scaling machinery applies uniformly. Vectors are rotated
// without centering: distances only depend on differences, so the mean is
// kept for diagnostics only. Immutable once fitted.
struct OrthoTransform {
    std::uint32_t dim = 0;
    TransformKind kind = TransformKind::pca;
    std::vector<double> mean;           // D
    std::vector<double> eigenvalues;    // D, nonincreasing, >= 0
    std::vector<double> lambda_prefix;  // D + 1 partial sums, lambda_prefix[0] = 0
    std::vector<double> matrix;         // D x D column-major

    const double* column(std::uint32_t k) const {
        return matrix.data() + static_cast<std::size_t>(k) * dim;
    }

    // Ratio of total variance to the variance captured by the first d
    // components. Exactly 1 at d = dim. Returns 1 when the prefix is zero;
    // scale_defined tells that case apart.
    double scale_factor(std::uint32_t d) const;
    bool scale_defined(std::uint32_t d) const;

    void transform_vector(const float* in, float* out) const;

    void save(const std::filesystem::path& path) const;
    static OrthoTransform load(const std::filesystem::path& path);
};

OrthoTransform fit_pca(const VectorSet& data);

// Random orthogonal basis; eigenvalues are filled with the empirical
// per-component variances of the projected fitting data.
OrthoTransform fit_random_orthogonal(std::uint32_t dim, std::uint64_t seed, const VectorSet& data);

VectorSet apply_transform(const OrthoTransform& t, const VectorSet& data);

}  // namespace dade
