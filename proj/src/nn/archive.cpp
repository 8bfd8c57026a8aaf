#include "vaetpp/nn/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vaetpp::nn {

namespace {

constexpr char kMagic[4] = {'V', 'T', 'P', 'A'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw std::runtime_error("truncated tensor archive");
    }
    return value;
}

} // namespace

void write_archive(std::ostream& out, const std::map<std::string, Matrix>& tensors, TensorPrecision precision) {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, tensors.size());
    for (const auto& [name, m] : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(out, 2);
        put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(precision));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (precision == TensorPrecision::f64) {
                    put<double>(out, m(i, j));
                } else {
                    put<float>(out, static_cast<float>(m(i, j)));
                }
            }
        }
    }
    if (!out) {
        throw std::runtime_error("failed writing tensor archive");
    }
}

void save_archive(const std::string& path, const std::map<std::string, Matrix>& tensors, TensorPrecision precision) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    write_archive(out, tensors, precision);
}

std::map<std::string, Matrix> read_archive(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("not a tensor archive (bad magic)");
    }
    if (const auto version = get<std::uint32_t>(in); version != kVersion) {
        throw std::runtime_error("unsupported tensor archive version " + std::to_string(version));
    }
    const auto count = get<std::uint64_t>(in);
    std::map<std::string, Matrix> out;
    for (std::uint64_t n = 0; n < count; ++n) {
        const auto len = get<std::uint32_t>(in);
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) {
            throw std::runtime_error("truncated tensor archive");
        }
        const auto ndim = get<std::uint32_t>(in);
        if (ndim != 2) {
            throw std::runtime_error("tensor '" + name + "' is not two-dimensional");
        }
        const auto rows = get<std::uint64_t>(in);
        const auto cols = get<std::uint64_t>(in);
        const auto dtype = get<std::uint8_t>(in);
        if (dtype != static_cast<std::uint8_t>(TensorPrecision::f64) &&
            dtype != static_cast<std::uint8_t>(TensorPrecision::f32)) {
            throw std::runtime_error("tensor '" + name + "' has unknown dtype");
        }
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                m(i, j) = dtype == static_cast<std::uint8_t>(TensorPrecision::f64) ? get<double>(in) : get<float>(in);
            }
        }
        out.emplace(std::move(name), std::move(m));
    }
    return out;
}

std::map<std::string, Matrix> load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    return read_archive(in);
}

} // namespace vaetpp::nn
