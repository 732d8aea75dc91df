#include "dade/transform.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dade/detail/binary_io.hpp"
#include "dade/rng.hpp"

namespace dade {

namespace {

constexpr char kMagic[4] = {'D', 'A', 'D', 'E'};
constexpr std::uint32_t kVersion = 1;
constexpr double kEigenClampTol = 1e-6;

std::vector<double> prefix_sums(const std::vector<double>& values) {
    std::vector<double> prefix(values.size() + 1, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) prefix[i + 1] = prefix[i] + values[i];
    return prefix;
}

// Clamp tiny negative eigenvalues produced by rounding; anything clearly
// negative means the input was not a covariance matrix.
void clamp_eigenvalues(std::vector<double>& values) {
    for (double& v : values) {
        if (v < -kEigenClampTol)
            throw std::runtime_error("eigenvalue " + std::to_string(v) +
                                     " below tolerance; input is not positive semidefinite");
        if (v < 0.0) v = 0.0;
    }
}

// Deterministic column order: variance descending, original position on
// ties. Returns the permutation, does not touch the inputs.
std::vector<std::uint32_t> descending_order(const std::vector<double>& values) {
    std::vector<std::uint32_t> order(values.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return values[a] > values[b]; });
    return order;
}

void orient_column(double* col, std::uint32_t dim) {
    for (std::uint32_t r = 0; r < dim; ++r) {
        if (col[r] != 0.0) {
            if (col[r] < 0.0)
                for (std::uint32_t s = 0; s < dim; ++s) col[s] = -col[s];
            return;
        }
    }
}

std::vector<double> dataset_mean(const VectorSet& data) {
    std::vector<double> mean(data.dim, 0.0);
    for (std::uint32_t i = 0; i < data.count; ++i) {
        const float* row = data.row(i);
        for (std::uint32_t k = 0; k < data.dim; ++k) mean[k] += row[k];
    }
    for (double& m : mean) m /= data.count;
    return mean;
}

}  // namespace

CovarianceResult compute_covariance(const VectorSet& data) {
    data.validate();
    if (data.count < 2) throw InvalidInput("compute_covariance: need at least 2 vectors");
    const std::uint32_t d = data.dim;

    CovarianceResult res;
    res.mean = dataset_mean(data);
    res.cov.assign(static_cast<std::size_t>(d) * d, 0.0);

    std::vector<double> centered(d);
    for (std::uint32_t i = 0; i < data.count; ++i) {
        const float* row = data.row(i);
        for (std::uint32_t k = 0; k < d; ++k) centered[k] = row[k] - res.mean[k];
        for (std::uint32_t r = 0; r < d; ++r) {
            const double cr = centered[r];
            double* out = res.cov.data() + static_cast<std::size_t>(r) * d;
            for (std::uint32_t c = r; c < d; ++c) out[c] += cr * centered[c];
        }
    }
    for (std::uint32_t r = 0; r < d; ++r)
        for (std::uint32_t c = r; c < d; ++c) {
            const double v = res.cov[static_cast<std::size_t>(r) * d + c] / data.count;
            res.cov[static_cast<std::size_t>(r) * d + c] = v;
            res.cov[static_cast<std::size_t>(c) * d + r] = v;
        }
    return res;
}

EigenDecomposition jacobi_eigendecomposition(const std::vector<double>& sym, std::uint32_t n) {
    if (n == 0 || sym.size() != static_cast<std::size_t>(n) * n)
        throw InvalidInput("jacobi_eigendecomposition: bad matrix size");

    std::vector<double> a = sym;
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);  // row-major rotation product
    for (std::uint32_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

    const auto at = [&](std::uint32_t r, std::uint32_t c) -> double& {
        return a[static_cast<std::size_t>(r) * n + c];
    };
    const auto vt = [&](std::uint32_t r, std::uint32_t c) -> double& {
        return v[static_cast<std::size_t>(r) * n + c];
    };

    double trace = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) trace += at(i, i);
    const double tol = 1e-10 * std::abs(trace);

    const auto off_frobenius = [&]() {
        double s = 0.0;
        for (std::uint32_t r = 0; r < n; ++r)
            for (std::uint32_t c = r + 1; c < n; ++c) s += 2.0 * at(r, c) * at(r, c);
        return std::sqrt(s);
    };

    constexpr std::uint32_t kMaxSweeps = 100;
    std::uint32_t sweep = 0;
    while (off_frobenius() > tol) {
        if (sweep == kMaxSweeps)
            throw std::runtime_error("jacobi_eigendecomposition: no convergence after " +
                                     std::to_string(kMaxSweeps) + " sweeps");
        ++sweep;
        for (std::uint32_t p = 0; p < n; ++p) {
            for (std::uint32_t q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 1.0 / (2.0 * theta);
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                const double app = at(p, p), aqq = at(q, q);
                at(p, p) = app - t * apq;
                at(q, q) = aqq + t * apq;
                at(p, q) = 0.0;
                at(q, p) = 0.0;
                for (std::uint32_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = at(r, p), arq = at(r, q);
                    at(r, p) = c * arp - s * arq;
                    at(p, r) = at(r, p);
                    at(r, q) = s * arp + c * arq;
                    at(q, r) = at(r, q);
                }
                for (std::uint32_t r = 0; r < n; ++r) {
                    const double vrp = vt(r, p), vrq = vt(r, q);
                    vt(r, p) = c * vrp - s * vrq;
                    vt(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }

    EigenDecomposition dec;
    dec.sweeps = sweep;
    dec.values.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) dec.values[i] = at(i, i);
    dec.vectors.resize(static_cast<std::size_t>(n) * n);
    for (std::uint32_t k = 0; k < n; ++k)
        for (std::uint32_t r = 0; r < n; ++r)
            dec.vectors[static_cast<std::size_t>(k) * n + r] = vt(r, k);
    return dec;
}

std::vector<double> random_orthogonal(std::uint32_t dim, std::uint64_t seed) {
    if (dim == 0) throw InvalidInput("random_orthogonal: dim must be positive");
    std::mt19937_64 gen(seed);
    rng::Gaussian gauss;

    std::vector<double> m(static_cast<std::size_t>(dim) * dim);
    for (double& x : m) x = gauss(gen);

    // Modified Gram-Schmidt with one re-orthogonalization pass. Column norms
    // come out positive, which fixes the sign convention.
    for (std::uint32_t k = 0; k < dim; ++k) {
        double* col = m.data() + static_cast<std::size_t>(k) * dim;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::uint32_t j = 0; j < k; ++j) {
                const double* prev = m.data() + static_cast<std::size_t>(j) * dim;
                double dot = 0.0;
                for (std::uint32_t r = 0; r < dim; ++r) dot += prev[r] * col[r];
                for (std::uint32_t r = 0; r < dim; ++r) col[r] -= dot * prev[r];
            }
        }
        double norm = 0.0;
        for (std::uint32_t r = 0; r < dim; ++r) norm += col[r] * col[r];
        norm = std::sqrt(norm);
        if (norm < 1e-12)
            throw std::runtime_error("random_orthogonal: degenerate Gaussian draw");
        for (std::uint32_t r = 0; r < dim; ++r) col[r] /= norm;
    }
    return m;
}

double OrthoTransform::scale_factor(std::uint32_t d) const {
    if (d == 0 || d > dim) throw InvalidInput("scale_factor: d out of range");
    const double prefix = lambda_prefix[d];
    if (prefix <= 0.0) return 1.0;
    return lambda_prefix[dim] / prefix;
}

bool OrthoTransform::scale_defined(std::uint32_t d) const {
    if (d == 0 || d > dim) throw InvalidInput("scale_defined: d out of range");
    return lambda_prefix[d] > 0.0;
}

void OrthoTransform::transform_vector(const float* in, float* out) const {
    for (std::uint32_t k = 0; k < dim; ++k) {
        const double* col = column(k);
        double acc = 0.0;
        for (std::uint32_t r = 0; r < dim; ++r) acc += col[r] * in[r];
        out[k] = static_cast<float>(acc);
    }
}

OrthoTransform fit_pca(const VectorSet& data) {
    CovarianceResult cov = compute_covariance(data);
    const std::uint32_t d = data.dim;
    EigenDecomposition dec = jacobi_eigendecomposition(cov.cov, d);

    const std::vector<std::uint32_t> order = descending_order(dec.values);

    OrthoTransform t;
    t.dim = d;
    t.kind = TransformKind::pca;
    t.mean = std::move(cov.mean);
    t.eigenvalues.resize(d);
    t.matrix.resize(static_cast<std::size_t>(d) * d);
    for (std::uint32_t k = 0; k < d; ++k) {
        t.eigenvalues[k] = dec.values[order[k]];
        std::memcpy(t.matrix.data() + static_cast<std::size_t>(k) * d,
                    dec.vectors.data() + static_cast<std::size_t>(order[k]) * d,
                    sizeof(double) * d);
        orient_column(t.matrix.data() + static_cast<std::size_t>(k) * d, d);
    }
    clamp_eigenvalues(t.eigenvalues);
    t.lambda_prefix = prefix_sums(t.eigenvalues);
    return t;
}

OrthoTransform fit_random_orthogonal(std::uint32_t dim, std::uint64_t seed, const VectorSet& data) {
    data.validate();
    if (data.dim != dim) throw InvalidInput("fit_random_orthogonal: data dim mismatch");
    std::vector<double> q = random_orthogonal(dim, seed);

    // Empirical variance of each projected component, so the variance-ratio
    // scaling machinery has something to chew on even for a random basis.
    std::vector<double> var(dim, 0.0), mean_p(dim, 0.0);
    for (std::uint32_t i = 0; i < data.count; ++i) {
        const float* row = data.row(i);
        for (std::uint32_t k = 0; k < dim; ++k) {
            const double* col = q.data() + static_cast<std::size_t>(k) * dim;
            double p = 0.0;
            for (std::uint32_t r = 0; r < dim; ++r) p += col[r] * row[r];
            mean_p[k] += p;
            var[k] += p * p;
        }
    }
    for (std::uint32_t k = 0; k < dim; ++k) {
        mean_p[k] /= data.count;
        var[k] = std::max(0.0, var[k] / data.count - mean_p[k] * mean_p[k]);
    }

    const std::vector<std::uint32_t> order = descending_order(var);

    OrthoTransform t;
    t.dim = dim;
    t.kind = TransformKind::random;
    t.mean = dataset_mean(data);
    t.eigenvalues.resize(dim);
    t.matrix.resize(static_cast<std::size_t>(dim) * dim);
    for (std::uint32_t k = 0; k < dim; ++k) {
        t.eigenvalues[k] = var[order[k]];
        std::memcpy(t.matrix.data() + static_cast<std::size_t>(k) * dim,
                    q.data() + static_cast<std::size_t>(order[k]) * dim, sizeof(double) * dim);
    }
    t.lambda_prefix = prefix_sums(t.eigenvalues);
    return t;
}

VectorSet apply_transform(const OrthoTransform& t, const VectorSet& data) {
    data.validate();
    if (data.dim != t.dim) throw InvalidInput("apply_transform: dimension mismatch");
    VectorSet out;
    out.count = data.count;
    out.dim = data.dim;
    out.values.resize(data.values.size());
    for (std::uint32_t i = 0; i < data.count; ++i) t.transform_vector(data.row(i), out.row(i));
    return out;
}

void OrthoTransform::save(const std::filesystem::path& path) const {
    auto out = detail::open_output(path);
    out.write(kMagic, sizeof kMagic);
    detail::write_pod(out, kVersion);
    detail::write_pod(out, static_cast<std::uint8_t>(kind));
    detail::write_pod(out, dim);
    detail::write_span(out, mean.data(), mean.size());
    detail::write_span(out, eigenvalues.data(), eigenvalues.size());
    detail::write_span(out, matrix.data(), matrix.size());
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

OrthoTransform OrthoTransform::load(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    char magic[4];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("not a transform file: " + path.string());
    const auto version = detail::read_pod<std::uint32_t>(in, "version");
    if (version != kVersion)
        throw std::runtime_error("unsupported transform version " + std::to_string(version));
    const auto kind_raw = detail::read_pod<std::uint8_t>(in, "kind");
    if (kind_raw > 1) throw std::runtime_error("bad transform kind byte");

    OrthoTransform t;
    t.kind = static_cast<TransformKind>(kind_raw);
    t.dim = detail::read_pod<std::uint32_t>(in, "dim");
    if (t.dim == 0) throw std::runtime_error("transform dim is zero");
    t.mean = detail::read_vec<double>(in, t.dim, "mean");
    t.eigenvalues = detail::read_vec<double>(in, t.dim, "eigenvalues");
    t.matrix = detail::read_vec<double>(in, static_cast<std::size_t>(t.dim) * t.dim, "matrix");

    for (std::uint32_t k = 0; k + 1 < t.dim; ++k)
        if (t.eigenvalues[k] < t.eigenvalues[k + 1])
            throw std::runtime_error("transform eigenvalues not nonincreasing");
    clamp_eigenvalues(t.eigenvalues);
    t.lambda_prefix = prefix_sums(t.eigenvalues);

    // Cheap corruption check: columns must stay orthonormal.
    double worst = 0.0;
    for (std::uint32_t a = 0; a < t.dim; ++a)
        for (std::uint32_t b = a; b < t.dim; ++b) {
            double dot = 0.0;
            const double* ca = t.column(a);
            const double* cb = t.column(b);
            for (std::uint32_t r = 0; r < t.dim; ++r) dot += ca[r] * cb[r];
            worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
        }
    if (worst > 1e-5)
        throw std::runtime_error("transform matrix not orthogonal (max deviation " +
                                 std::to_string(worst) + ")");
    return t;
}

}  // namespace dade
