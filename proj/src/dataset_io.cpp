#include "dade/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dade/detail/binary_io.hpp"
#include "dade/distance.hpp"
#include "dade/error.hpp"
#include "dade/rng.hpp"
#include "dade/transform.hpp"

namespace dade {

namespace {

// Reads one header int; distinguishes clean EOF (false) from a torn record.
bool read_record_dim(std::istream& in, std::int32_t& dim, const std::filesystem::path& path) {
    char buf[4];
    in.read(buf, 1);
    if (in.gcount() == 0) return false;
    in.read(buf + 1, 3);
    if (in.gcount() != 3) throw std::runtime_error("truncated record header in " + path.string());
    std::memcpy(&dim, buf, 4);
    return true;
}

}  // namespace

VectorSet read_fvecs(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    VectorSet out;
    std::int32_t dim = 0;
    while (read_record_dim(in, dim, path)) {
        if (dim <= 0)
            throw std::runtime_error("bad record dimension " + std::to_string(dim) + " in " +
                                     path.string());
        if (out.count == 0) {
            out.dim = static_cast<std::uint32_t>(dim);
        } else if (static_cast<std::uint32_t>(dim) != out.dim) {
            throw std::runtime_error("inconsistent dimensions in " + path.string() + ": " +
                                     std::to_string(out.dim) + " then " + std::to_string(dim));
        }
        const std::size_t old = out.values.size();
        out.values.resize(old + static_cast<std::size_t>(dim));
        in.read(reinterpret_cast<char*>(out.values.data() + old),
                static_cast<std::streamsize>(sizeof(float) * dim));
        if (!in) throw std::runtime_error("truncated record payload in " + path.string());
        ++out.count;
    }
    out.validate();
    return out;
}

void write_fvecs(const std::filesystem::path& path, const VectorSet& data) {
    data.validate();
    auto out = detail::open_output(path);
    const auto dim = static_cast<std::int32_t>(data.dim);
    for (std::uint32_t i = 0; i < data.count; ++i) {
        detail::write_pod(out, dim);
        detail::write_span(out, data.row(i), data.dim);
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::vector<std::int32_t>> read_ivecs(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    std::vector<std::vector<std::int32_t>> out;
    std::int32_t dim = 0;
    while (read_record_dim(in, dim, path)) {
        if (dim <= 0)
            throw std::runtime_error("bad record dimension " + std::to_string(dim) + " in " +
                                     path.string());
        if (!out.empty() && out.front().size() != static_cast<std::size_t>(dim))
            throw std::runtime_error("inconsistent dimensions in " + path.string());
        out.emplace_back(detail::read_vec<std::int32_t>(in, static_cast<std::size_t>(dim),
                                                        "record payload"));
    }
    return out;
}

void write_ivecs(const std::filesystem::path& path,
                 const std::vector<std::vector<std::int32_t>>& records) {
    auto out = detail::open_output(path);
    for (const auto& rec : records) {
        if (rec.empty()) throw InvalidInput("write_ivecs: empty record");
        if (rec.size() != records.front().size())
            throw InvalidInput("write_ivecs: records must share one dimension");
        detail::write_pod(out, static_cast<std::int32_t>(rec.size()));
        detail::write_span(out, rec.data(), rec.size());
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

GroundTruth compute_ground_truth(const VectorSet& data, const VectorSet& queries,
                                 std::uint32_t k) {
    data.validate();
    queries.validate();
    if (queries.dim != data.dim) throw InvalidInput("ground truth: dimension mismatch");
    if (k == 0 || k > data.count)
        throw InvalidInput("ground truth: k must be in [1, count], got " + std::to_string(k));

    GroundTruth gt;
    gt.k = k;
    gt.ids.resize(queries.count);
    // 64-bit distances so ties are ties and not rounding accidents.
    std::vector<std::pair<double, std::uint32_t>> heap;  // max-heap
    for (std::uint32_t qi = 0; qi < queries.count; ++qi) {
        heap.clear();
        const float* q = queries.row(qi);
        for (std::uint32_t id = 0; id < data.count; ++id) {
            const double d2 = l2_sq_double(data.row(id), q, data.dim);
            const std::pair<double, std::uint32_t> entry{d2, id};
            if (heap.size() < k) {
                heap.push_back(entry);
                std::push_heap(heap.begin(), heap.end());
            } else if (entry < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = entry;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        std::sort_heap(heap.begin(), heap.end());
        auto& ids = gt.ids[qi];
        ids.reserve(k);
        for (const auto& [d2, id] : heap) ids.push_back(id);
    }
    return gt;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
    std::vector<std::vector<std::int32_t>> recs(gt.ids.size());
    for (std::size_t i = 0; i < gt.ids.size(); ++i)
        recs[i].assign(gt.ids[i].begin(), gt.ids[i].end());
    write_ivecs(path, recs);
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
    const auto recs = read_ivecs(path);
    GroundTruth gt;
    if (recs.empty()) throw std::runtime_error("empty ground truth file: " + path.string());
    gt.k = static_cast<std::uint32_t>(recs.front().size());
    gt.ids.resize(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        for (const std::int32_t id : recs[i]) {
            if (id < 0) throw std::runtime_error("negative id in ground truth file");
            gt.ids[i].push_back(static_cast<std::uint32_t>(id));
        }
    }
    return gt;
}

double recall(const std::vector<std::vector<std::uint32_t>>& result, const GroundTruth& truth) {
    if (result.size() != truth.ids.size())
        throw InvalidInput("recall: result and truth have different query counts");
    if (truth.ids.empty()) throw InvalidInput("recall: no queries");
    double sum = 0.0;
    for (std::size_t qi = 0; qi < result.size(); ++qi) {
        std::vector<std::uint32_t> truth_ids = truth.ids[qi];
        std::sort(truth_ids.begin(), truth_ids.end());
        std::uint64_t hit = 0;
        for (const std::uint32_t id : result[qi])
            if (std::binary_search(truth_ids.begin(), truth_ids.end(), id)) ++hit;
        sum += static_cast<double>(hit) / static_cast<double>(truth.k);
    }
    return sum / static_cast<double>(result.size());
}

SynthSpec parse_synth_spec(std::istream& in) {
    SynthSpec spec;
    bool have_count = false, have_dim = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("synth config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        try {
            if (key == "count") {
                spec.count = static_cast<std::uint32_t>(std::stoul(value));
                have_count = true;
            } else if (key == "dim") {
                spec.dim = static_cast<std::uint32_t>(std::stoul(value));
                have_dim = true;
            } else if (key == "queries") {
                spec.query_count = static_cast<std::uint32_t>(std::stoul(value));
            } else if (key == "seed") {
                spec.seed = std::stoull(value);
            } else if (key == "spectrum") {
                if (value == "power") spec.spectrum = SynthSpec::Spectrum::power;
                else if (value == "uniform") spec.spectrum = SynthSpec::Spectrum::uniform;
                else if (value == "values") spec.spectrum = SynthSpec::Spectrum::values;
                else throw ConfigError("synth config: unknown spectrum '" + value + "'");
            } else if (key == "alpha") {
                spec.alpha = std::stod(value);
            } else if (key == "values") {
                spec.values.clear();
                std::stringstream ss(value);
                std::string tok;
                while (std::getline(ss, tok, ',')) spec.values.push_back(std::stod(strip(tok)));
            } else if (key == "rotate") {
                if (value == "true" || value == "1") spec.rotate = true;
                else if (value == "false" || value == "0") spec.rotate = false;
                else throw ConfigError("synth config: rotate must be true or false");
            } else if (key == "mean_shift") {
                spec.mean_shift = std::stod(value);
            } else {
                throw ConfigError("synth config: unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("synth config line " + std::to_string(lineno) + ": bad value for " + key);
        } catch (const std::out_of_range&) {
            throw ConfigError("synth config line " + std::to_string(lineno) + ": value out of range");
        }
    }
    if (!have_count || !have_dim) throw ConfigError("synth config: count and dim are required");
    if (spec.count == 0 || spec.dim == 0) throw ConfigError("synth config: count and dim must be positive");
    return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open synth config: " + path.string());
    return parse_synth_spec(in);
}

std::vector<double> synth_spectrum(const SynthSpec& spec) {
    std::vector<double> lambda(spec.dim);
    switch (spec.spectrum) {
        case SynthSpec::Spectrum::power:
            for (std::uint32_t k = 0; k < spec.dim; ++k)
                lambda[k] = std::pow(static_cast<double>(k + 1), -spec.alpha);
            break;
        case SynthSpec::Spectrum::uniform:
            std::fill(lambda.begin(), lambda.end(), 1.0);
            break;
        case SynthSpec::Spectrum::values:
            if (spec.values.size() != spec.dim)
                throw ConfigError("synth spectrum: need exactly dim values, got " +
                                  std::to_string(spec.values.size()));
            lambda = spec.values;
            break;
    }
    for (const double v : lambda)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError("synth spectrum: variances must be finite and nonnegative");
    return lambda;
}

SynthDataset make_synthetic(const SynthSpec& spec) {
    const std::vector<double> lambda = synth_spectrum(spec);
    std::vector<double> sd(spec.dim);
    for (std::uint32_t k = 0; k < spec.dim; ++k) sd[k] = std::sqrt(lambda[k]);

    // One rotation shared by data and queries, drawn from its own stream so
    // sample counts never disturb it.
    std::vector<double> rot;
    if (spec.rotate) rot = random_orthogonal(spec.dim, spec.seed ^ 0x9e3779b97f4a7c15ull);

    std::mt19937_64 gen(spec.seed);
    rng::Gaussian gauss;
    std::vector<double> latent(spec.dim);

    const auto fill = [&](VectorSet& out, std::uint32_t n) {
        out.count = n;
        out.dim = spec.dim;
        out.values.resize(static_cast<std::size_t>(n) * spec.dim);
        for (std::uint32_t i = 0; i < n; ++i) {
            for (std::uint32_t k = 0; k < spec.dim; ++k) latent[k] = sd[k] * gauss(gen);
            float* row = out.row(i);
            if (spec.rotate) {
                for (std::uint32_t r = 0; r < spec.dim; ++r) {
                    double acc = 0.0;
                    // rot is column-major; row r of the matrix times latent
                    for (std::uint32_t k = 0; k < spec.dim; ++k)
                        acc += rot[static_cast<std::size_t>(k) * spec.dim + r] * latent[k];
                    row[r] = static_cast<float>(acc + spec.mean_shift);
                }
            } else {
                for (std::uint32_t k = 0; k < spec.dim; ++k)
                    row[k] = static_cast<float>(latent[k] + spec.mean_shift);
            }
        }
    };

    SynthDataset out;
    fill(out.data, spec.count);
    if (spec.query_count > 0) fill(out.queries, spec.query_count);
    return out;
}

}  // namespace dade
