#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dade/error.hpp"

namespace dade {

// N row-contiguous D-dimensional float vectors.
struct VectorSet {
    std::uint32_t count = 0;
    std::uint32_t dim = 0;
    std::vector<float> values;  // count * dim

    const float* row(std::uint32_t i) const {
        return values.data() + static_cast<std::size_t>(i) * dim;
    }
    float* row(std::uint32_t i) { return values.data() + static_cast<std::size_t>(i) * dim; }
    std::span<const float> row_span(std::uint32_t i) const { return {row(i), dim}; }

    void validate() const {
        if (dim == 0) throw InvalidInput("VectorSet: dim must be positive");
        if (count == 0) throw InvalidInput("VectorSet: count must be positive");
        if (values.size() != static_cast<std::size_t>(count) * dim)
            throw InvalidInput("VectorSet: values size " + std::to_string(values.size()) +
                               " does not match count*dim " +
                               std::to_string(static_cast<std::size_t>(count) * dim));
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!std::isfinite(values[i]))
                throw InvalidInput("VectorSet: non-finite value at flat index " + std::to_string(i));
    }
};

}  // namespace dade
