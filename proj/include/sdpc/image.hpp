#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sdpc/errors.hpp"

namespace sdpc {

enum class ScanOrder : std::uint8_t {
    Raster = 0,      // left to right, then top to bottom
    ColumnMajor = 1, // top to bottom, then left to right
};

const char* scan_order_name(ScanOrder order);

// 8-bit grayscale image, samples row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> samples;

    std::uint8_t at(int row, int col) const {
        return samples[static_cast<std::size_t>(row) * width + col];
    }
    std::uint8_t& at(int row, int col) {
        return samples[static_cast<std::size_t>(row) * width + col];
    }
    std::int64_t pixel_count() const {
        return static_cast<std::int64_t>(width) * height;
    }
    bool same_dims(const Image& o) const {
        return width == o.width && height == o.height;
    }
};

// Non-overlapped block grid covering the (padded) image.
struct BlockLattice {
    int block_size = 0;
    int blocks_x = 0;
    int blocks_y = 0;
    ScanOrder order = ScanOrder::Raster;

    int count() const { return blocks_x * blocks_y; }

    // Scan position of the block at lattice coordinates (row, col).
    int scan_index(int row, int col) const {
        return order == ScanOrder::Raster ? row * blocks_x + col
                                          : col * blocks_y + row;
    }
    // Lattice coordinates (row, col) of the block at scan position i.
    std::pair<int, int> block_position(int i) const {
        if (order == ScanOrder::Raster) return {i / blocks_x, i % blocks_x};
        return {i % blocks_y, i / blocks_y};
    }
};

// Blocks flattened row-major into columns, ordered by scan position. Images
// whose dimensions are not multiples of the block size are edge-replicated to
// the next multiple; the original dimensions are kept so PSNR and cropping
// always refer to real samples only.
struct BlockSet {
    BlockLattice lattice;
    int original_width = 0;
    int original_height = 0;
    Eigen::MatrixXd columns; // B^2 x n
};

Image load_pgm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> store_pgm(const Image& img);

Image load_pgm_file(const std::string& path);
void store_pgm_file(const std::string& path, const Image& img);

// Headerless row-major 8-bit payload with externally supplied dimensions.
Image load_raw(const std::vector<std::uint8_t>& bytes, int width, int height);

BlockSet to_blocks(const Image& img, int block_size, ScanOrder order);

// Inverse of to_blocks on the padded grid, cropped to the original
// dimensions. Values are rounded half away from zero, then clamped to
// [0, 255].
Image from_blocks(const Eigen::MatrixXd& columns, const BlockLattice& lattice,
                  int original_width, int original_height);

} // namespace sdpc
