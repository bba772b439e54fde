#include "sdpc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace sdpc {

namespace {

// PGM header tokenizer: skips whitespace and '#' comments.
struct HeaderCursor {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
    }

    long next_int() {
        skip_space_and_comments();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
            throw PgmParseError(PgmError::BadHeader, "pgm: malformed header field");
        long value = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            value = value * 10 + (bytes[pos] - '0');
            if (value > 1'000'000'000L)
                throw PgmParseError(PgmError::BadHeader, "pgm: header field out of range");
            ++pos;
        }
        return value;
    }
};

void check_dims(int width, int height) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("image dimensions must be positive");
    if (static_cast<std::int64_t>(width) * height > (std::int64_t{1} << 31))
        throw std::invalid_argument("image too large");
}

} // namespace

const char* scan_order_name(ScanOrder order) {
    return order == ScanOrder::Raster ? "raster" : "column";
}

Image load_pgm(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P')
        throw PgmParseError(PgmError::BadMagic, "pgm: not a PGM file");
    if (bytes[1] != '5') {
        if (bytes[1] == '2')
            throw PgmParseError(PgmError::BadMagic, "pgm: ASCII (P2) format unsupported, need binary P5");
        throw PgmParseError(PgmError::BadMagic, "pgm: unsupported magic");
    }

    HeaderCursor cur{bytes, 2};
    const long width = cur.next_int();
    const long height = cur.next_int();
    const long maxval = cur.next_int();
    if (width <= 0 || height <= 0)
        throw PgmParseError(PgmError::BadHeader, "pgm: nonpositive dimensions");
    if (maxval != 255)
        throw PgmParseError(PgmError::UnsupportedMaxval, "pgm: only maxval 255 supported");

    // Exactly one whitespace byte separates the header from the payload.
    if (cur.pos >= bytes.size() || !std::isspace(bytes[cur.pos]))
        throw PgmParseError(PgmError::BadHeader, "pgm: missing payload separator");
    ++cur.pos;

    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - cur.pos < need)
        throw PgmParseError(PgmError::TruncatedPayload, "pgm: truncated payload");

    Image img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.samples.assign(bytes.begin() + cur.pos, bytes.begin() + cur.pos + need);
    return img;
}

std::vector<std::uint8_t> store_pgm(const Image& img) {
    check_dims(img.width, img.height);
    if (img.samples.size() != static_cast<std::size_t>(img.pixel_count()))
        throw std::invalid_argument("image sample count does not match dimensions");
    char header[64];
    const int len = std::snprintf(header, sizeof header, "P5\n%d %d\n255\n", img.width, img.height);
    std::vector<std::uint8_t> out(header, header + len);
    out.insert(out.end(), img.samples.begin(), img.samples.end());
    return out;
}

Image load_pgm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return load_pgm(bytes);
}

void store_pgm_file(const std::string& path, const Image& img) {
    const auto bytes = store_pgm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Image load_raw(const std::vector<std::uint8_t>& bytes, int width, int height) {
    check_dims(width, height);
    const std::size_t need = static_cast<std::size_t>(width) * height;
    if (bytes.size() < need)
        throw PgmParseError(PgmError::TruncatedPayload, "raw: payload shorter than width*height");
    Image img;
    img.width = width;
    img.height = height;
    img.samples.assign(bytes.begin(), bytes.begin() + need);
    return img;
}

BlockSet to_blocks(const Image& img, int block_size, ScanOrder order) {
    if (block_size < 2) throw std::invalid_argument("block size must be at least 2");
    check_dims(img.width, img.height);
    if (img.samples.size() != static_cast<std::size_t>(img.pixel_count()))
        throw std::invalid_argument("image sample count does not match dimensions");

    const int bx = (img.width + block_size - 1) / block_size;
    const int by = (img.height + block_size - 1) / block_size;

    BlockSet set;
    set.lattice = BlockLattice{block_size, bx, by, order};
    set.original_width = img.width;
    set.original_height = img.height;
    set.columns.resize(static_cast<Eigen::Index>(block_size) * block_size,
                       set.lattice.count());

    for (int i = 0; i < set.lattice.count(); ++i) {
        const auto [br, bc] = set.lattice.block_position(i);
        for (int py = 0; py < block_size; ++py) {
            const int sy = std::min(br * block_size + py, img.height - 1);
            for (int px = 0; px < block_size; ++px) {
                const int sx = std::min(bc * block_size + px, img.width - 1);
                set.columns(static_cast<Eigen::Index>(py) * block_size + px, i) =
                    static_cast<double>(img.at(sy, sx));
            }
        }
    }
    return set;
}

Image from_blocks(const Eigen::MatrixXd& columns, const BlockLattice& lattice,
                  int original_width, int original_height) {
    const int B = lattice.block_size;
    if (columns.cols() != lattice.count())
        throw std::invalid_argument("block count does not match lattice");
    if (columns.rows() != static_cast<Eigen::Index>(B) * B)
        throw std::invalid_argument("block vector length does not match lattice");
    check_dims(original_width, original_height);
    if (lattice.blocks_x * B < original_width || lattice.blocks_y * B < original_height)
        throw std::invalid_argument("lattice smaller than original dimensions");

    Image img;
    img.width = original_width;
    img.height = original_height;
    img.samples.resize(static_cast<std::size_t>(img.pixel_count()));

    for (int i = 0; i < lattice.count(); ++i) {
        const auto [br, bc] = lattice.block_position(i);
        const int y0 = br * B;
        const int x0 = bc * B;
        if (y0 >= original_height || x0 >= original_width) continue;
        const int ylim = std::min(B, original_height - y0);
        const int xlim = std::min(B, original_width - x0);
        for (int py = 0; py < ylim; ++py) {
            for (int px = 0; px < xlim; ++px) {
                const double v = columns(static_cast<Eigen::Index>(py) * B + px, i);
                const long long r = std::llround(v);
                img.at(y0 + py, x0 + px) =
                    static_cast<std::uint8_t>(std::clamp(r, 0LL, 255LL));
            }
        }
    }
    return img;
}

} // namespace sdpc
