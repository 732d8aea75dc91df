#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

// Raw little-endian reads and writes shared by the artifact file formats.

namespace dade::detail {

static_assert(std::endian::native == std::endian::little,
              "artifact files are little-endian; byte swapping is not implemented");

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void write_span(std::ostream& out, const T* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error(std::string("truncated file while reading ") + what);
    return v;
}

template <typename T>
std::vector<T> read_vec(std::istream& in, std::size_t n, const char* what) {
    std::vector<T> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in) throw std::runtime_error(std::string("truncated file while reading ") + what);
    return v;
}

}  // namespace dade::detail
