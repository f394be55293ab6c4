#ifndef IRMMV_MNIST_HPP
#define IRMMV_MNIST_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "irmmv/matrix.hpp"
#include "irmmv/random.hpp"

namespace irmmv {

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("IDX: truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

} // namespace detail

constexpr std::uint32_t kIdx3ImagesMagic = 0x00000803;

/// Reads the first `count` images of an IDX3 unsigned-byte image file into a
/// (rows*cols) x count matrix with entries in [0, 1] (byte / 255); column j
/// is image j flattened row-major.
inline Matrix load_mnist_idx(const std::string& images_path, std::size_t count) {
    std::ifstream f(images_path, std::ios::binary);
    if (!f)
        throw IoError("load_mnist_idx: cannot open '" + images_path +
                      "'. Download train-images-idx3-ubyte from the MNIST distribution "
                      "(e.g. https://yann.lecun.com/exdb/mnist/) and decompress it.");
    const std::uint32_t magic = detail::read_be_u32(f);
    if (magic != kIdx3ImagesMagic)
        throw FormatError("load_mnist_idx: bad magic (expected 0x00000803)");
    const std::uint32_t n_images = detail::read_be_u32(f);
    const std::uint32_t n_rows = detail::read_be_u32(f);
    const std::uint32_t n_cols = detail::read_be_u32(f);
    if (count < 1 || count > n_images)
        throw FormatError("load_mnist_idx: requested more images than the file holds");
    const std::size_t pixels = std::size_t(n_rows) * n_cols;
    std::vector<unsigned char> buf(pixels);
    Matrix out(pixels, count);
    for (std::size_t j = 0; j < count; ++j) {
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!f) throw FormatError("load_mnist_idx: truncated image data");
        for (std::size_t p = 0; p < pixels; ++p) out(p, j) = buf[p] / 255.0;
    }
    return out;
}

/// Writes images (columns of a (rows*cols) x count matrix, entries in [0,1])
/// as an IDX3 unsigned-byte file. Inverse of load_mnist_idx up to the byte
/// quantization, and exactly inverse on data produced by load_mnist_idx.
inline void save_mnist_idx(const std::string& path, const Matrix& images, std::size_t rows,
                           std::size_t cols) {
    if (images.rows() != rows * cols)
        throw DimensionError("save_mnist_idx: matrix rows != rows*cols");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_mnist_idx: cannot open " + path);
    detail::write_be_u32(f, kIdx3ImagesMagic);
    detail::write_be_u32(f, static_cast<std::uint32_t>(images.cols()));
    detail::write_be_u32(f, static_cast<std::uint32_t>(rows));
    detail::write_be_u32(f, static_cast<std::uint32_t>(cols));
    std::vector<unsigned char> buf(images.rows());
    for (std::size_t j = 0; j < images.cols(); ++j) {
        for (std::size_t p = 0; p < images.rows(); ++p) {
            const double v = images(p, j);
            if (v < 0.0 || v > 1.0)
                throw NumericError("save_mnist_idx: pixel outside [0, 1]");
            buf[p] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        f.write(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size()));
    }
}

/// Deterministic stand-in images (soft blobs on a 28x28 grid) for running the
/// recovery pipeline where the real dataset is not on disk. Same shape and
/// value range as the genuine files.
inline Matrix synthetic_digit_images(std::size_t count, std::uint64_t seed,
                                     std::size_t side = 28) {
    RandomStream rng(seed);
    Matrix out(side * side, count);
    const double s = static_cast<double>(side);
    for (std::size_t img = 0; img < count; ++img) {
        const std::size_t blobs = 2 + rng.below(3);
        for (std::size_t b = 0; b < blobs; ++b) {
            const double cx = s * (0.25 + 0.5 * rng.uniform());
            const double cy = s * (0.25 + 0.5 * rng.uniform());
            const double sx = s * (0.06 + 0.10 * rng.uniform());
            const double sy = s * (0.06 + 0.10 * rng.uniform());
            const double amp = 0.7 + 0.3 * rng.uniform();
            for (std::size_t r = 0; r < side; ++r)
                for (std::size_t c = 0; c < side; ++c) {
                    const double dx = (c - cx) / sx, dy = (r - cy) / sy;
                    const double v = amp * std::exp(-0.5 * (dx * dx + dy * dy));
                    double& px = out(r * side + c, img);
                    px = std::min(1.0, px + v);
                }
        }
        // quantize like the byte format so round trips are exact
        for (std::size_t p = 0; p < side * side; ++p)
            out(p, img) = std::lround(out(p, img) * 255.0) / 255.0;
    }
    return out;
}

} // namespace irmmv

#endif
