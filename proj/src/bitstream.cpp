#include "sdpc/bitstream.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

namespace sdpc {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct ByteCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (bytes.size() - pos < n)
            throw StreamFormatError(StreamError::Truncated, "stream: truncated header");
    }
    std::uint8_t u8() { need(1); return bytes[pos++]; }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = bytes[pos] | (std::uint16_t(bytes[pos + 1]) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
};

// Largest index magnitude the signed Exp-Golomb mapping accepts.
constexpr std::int64_t kMaxIndexMagnitude = (std::int64_t{1} << 31) - 1;

void validate_header(const StreamHeader& h) {
    if (h.width == 0 || h.height == 0)
        throw StreamFormatError(StreamError::BadHeaderField, "stream: zero image dimension");
    if (h.block_size < 2)
        throw StreamFormatError(StreamError::BadHeaderField, "stream: block size below 2");
    const std::uint64_t bsq = std::uint64_t(h.block_size) * h.block_size;
    if (h.measurement_count < 1 || h.measurement_count > bsq)
        throw StreamFormatError(StreamError::BadHeaderField, "stream: measurement count out of range");
    if (!(h.step > 0.0) || !std::isfinite(h.step))
        throw StreamFormatError(StreamError::BadHeaderField, "stream: quantizer step must be positive");
}

} // namespace

const char* mode_policy_name(ModePolicy policy) {
    switch (policy) {
        case ModePolicy::SdpcAll4: return "sdpc";
        case ModePolicy::DpcmPreviousBlock: return "dpcm";
        case ModePolicy::NoPrediction: return "none";
    }
    return "?";
}

const char* prediction_mode_name(PredictionMode mode) {
    switch (mode) {
        case PredictionMode::Vertical: return "vertical";
        case PredictionMode::Horizontal: return "horizontal";
        case PredictionMode::DC: return "dc";
        case PredictionMode::Diagonal: return "diagonal";
    }
    return "?";
}

BlockLattice StreamHeader::lattice() const {
    const int bx = (static_cast<int>(width) + block_size - 1) / block_size;
    const int by = (static_cast<int>(height) + block_size - 1) / block_size;
    return BlockLattice{block_size, bx, by, scan_order};
}

int StreamHeader::block_count() const { return lattice().count(); }

void BitWriter::put_bit(bool bit) {
    acc_ = static_cast<std::uint8_t>((acc_ << 1) | (bit ? 1 : 0));
    if (++used_ == 8) {
        bytes_.push_back(acc_);
        acc_ = 0;
        used_ = 0;
    }
}

void BitWriter::put_bits(std::uint64_t value, int count) {
    for (int k = count - 1; k >= 0; --k) put_bit((value >> k) & 1);
}

std::vector<std::uint8_t> BitWriter::finish() {
    if (used_ > 0) {
        bytes_.push_back(static_cast<std::uint8_t>(acc_ << (8 - used_)));
        acc_ = 0;
        used_ = 0;
    }
    return std::move(bytes_);
}

bool BitReader::get_bit() {
    const std::size_t byte = consumed_ / 8;
    if (byte >= bytes_.size())
        throw StreamFormatError(StreamError::Truncated, "stream: payload exhausted");
    const int shift = 7 - static_cast<int>(consumed_ % 8);
    ++consumed_;
    return (bytes_[byte] >> shift) & 1;
}

std::uint64_t BitReader::get_bits(int count) {
    std::uint64_t v = 0;
    for (int i = 0; i < count; ++i) v = (v << 1) | (get_bit() ? 1 : 0);
    return v;
}

bool BitReader::only_zero_padding_left() const {
    const std::size_t total = bytes_.size() * 8;
    if (total - consumed_ >= 8) return false; // full bytes beyond the payload
    for (std::size_t b = consumed_; b < total; ++b) {
        const int shift = 7 - static_cast<int>(b % 8);
        if ((bytes_[b / 8] >> shift) & 1) return false;
    }
    return true;
}

void put_signed_exp_golomb(BitWriter& writer, std::int64_t value) {
    if (value > kMaxIndexMagnitude || value < -kMaxIndexMagnitude)
        throw StreamFormatError(StreamError::IndexOverflow,
                                "stream: index magnitude exceeds 2^31 - 1");
    const std::uint64_t mapped =
        value > 0 ? std::uint64_t(2 * value - 1) : std::uint64_t(-2 * value);
    const std::uint64_t code = mapped + 1;
    const int len = std::bit_width(code);
    writer.put_bits(0, len - 1);
    writer.put_bits(code, len);
}

std::int64_t get_signed_exp_golomb(BitReader& reader) {
    int zeros = 0;
    while (!reader.get_bit()) {
        if (++zeros > 32)
            throw StreamFormatError(StreamError::IndexOverflow,
                                    "stream: Exp-Golomb prefix too long");
    }
    const std::uint64_t code = (std::uint64_t{1} << zeros) | reader.get_bits(zeros);
    const std::uint64_t mapped = code - 1;
    return (mapped & 1) ? static_cast<std::int64_t>((mapped + 1) / 2)
                        : -static_cast<std::int64_t>(mapped / 2);
}

std::vector<std::uint8_t> write_stream(const EncodedStream& stream) {
    const StreamHeader& h = stream.header;
    validate_header(h);
    const int n = h.block_count();
    if (stream.blocks.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("stream: block count does not match header");

    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + stream.blocks.size() * h.measurement_count / 2);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u16(out, h.format_version);
    put_u16(out, h.generator_version);
    put_u32(out, h.width);
    put_u32(out, h.height);
    put_u16(out, h.block_size);
    put_u32(out, h.measurement_count);
    out.push_back(static_cast<std::uint8_t>(h.scan_order));
    out.push_back(static_cast<std::uint8_t>(h.mode_policy));
    put_u64(out, std::bit_cast<std::uint64_t>(h.step));
    put_u64(out, h.seed);

    BitWriter bits;
    for (std::size_t i = 0; i < stream.blocks.size(); ++i) {
        const BlockPayload& block = stream.blocks[i];
        if (block.mode.has_value() != h.signals_modes())
            throw std::invalid_argument("stream: mode flag presence does not match policy");
        if (block.indices.size() != h.measurement_count)
            throw std::invalid_argument("stream: index count does not match header");
        if (block.mode)
            bits.put_bits(static_cast<std::uint64_t>(*block.mode), 2);
        for (const std::int64_t s : block.indices) put_signed_exp_golomb(bits, s);
    }
    const auto payload = bits.finish();
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

EncodedStream read_stream(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw StreamFormatError(StreamError::BadMagic, "stream: bad magic");

    ByteCursor cur{bytes, 4};
    StreamHeader h;
    h.format_version = cur.u16();
    if (h.format_version != kFormatVersion)
        throw StreamFormatError(StreamError::VersionMismatch,
                                "stream: unknown format version " + std::to_string(h.format_version));
    h.generator_version = cur.u16();
    if (h.generator_version != kGeneratorVersion)
        throw StreamFormatError(StreamError::GeneratorVersionMismatch,
                                "stream: unknown generator version " + std::to_string(h.generator_version));
    h.width = cur.u32();
    h.height = cur.u32();
    h.block_size = cur.u16();
    h.measurement_count = cur.u32();
    const std::uint8_t scan = cur.u8();
    if (scan > 1)
        throw StreamFormatError(StreamError::BadHeaderField, "stream: unknown scan order");
    h.scan_order = static_cast<ScanOrder>(scan);
    const std::uint8_t policy = cur.u8();
    if (policy > 2)
        throw StreamFormatError(StreamError::BadHeaderField, "stream: unknown mode policy");
    h.mode_policy = static_cast<ModePolicy>(policy);
    h.step = std::bit_cast<double>(cur.u64());
    h.seed = cur.u64();
    validate_header(h);

    EncodedStream stream;
    stream.header = h;
    const int n = h.block_count();
    stream.blocks.resize(static_cast<std::size_t>(n));

    BitReader bits(bytes.subspan(cur.pos));
    for (int i = 0; i < n; ++i) {
        BlockPayload& block = stream.blocks[static_cast<std::size_t>(i)];
        try {
            if (h.signals_modes())
                block.mode = static_cast<PredictionMode>(bits.get_bits(2));
            block.indices.resize(h.measurement_count);
            for (std::uint32_t k = 0; k < h.measurement_count; ++k)
                block.indices[k] = get_signed_exp_golomb(bits);
        } catch (const StreamFormatError& e) {
            if (e.block_index() >= 0) throw;
            throw StreamFormatError(e.code(),
                                    std::string(e.what()) + " (block " + std::to_string(i) + ")", i);
        }
    }
    if (!bits.only_zero_padding_left())
        throw StreamFormatError(StreamError::TrailingGarbage,
                                "stream: trailing data beyond final block");
    return stream;
}

void write_stream_file(const std::string& path, const EncodedStream& stream) {
    const auto bytes = write_stream(stream);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

EncodedStream read_stream_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_stream(bytes);
}

RateEstimate estimate_rate(std::span<const std::int64_t> indices, int block_size,
                           int measurement_count, std::int64_t image_pixels,
                           bool modes_signaled) {
    if (indices.empty()) throw std::invalid_argument("estimate_rate: no indices");
    if (block_size < 2) throw std::invalid_argument("estimate_rate: bad block size");
    if (measurement_count < 1) throw std::invalid_argument("estimate_rate: bad measurement count");
    if (image_pixels < 1) throw std::invalid_argument("estimate_rate: bad pixel count");
    if (indices.size() % static_cast<std::size_t>(measurement_count) != 0)
        throw std::invalid_argument("estimate_rate: index count not a multiple of M_B");

    std::map<std::int64_t, std::size_t> histogram;
    for (const std::int64_t s : indices) ++histogram[s];

    const double total = static_cast<double>(indices.size());
    double entropy = 0.0;
    for (const auto& [value, count] : histogram) {
        const double p = static_cast<double>(count) / total;
        entropy -= p * std::log2(p);
    }

    const double blocks = total / static_cast<double>(measurement_count);
    RateEstimate est;
    est.entropy_bits_per_index = entropy;
    est.index_bits = entropy * total;
    est.mode_overhead_bpp = modes_signaled ? 2.0 / (static_cast<double>(block_size) * block_size) : 0.0;
    est.total_bpp_no_modes = est.index_bits / static_cast<double>(image_pixels);
    est.total_bpp = (est.index_bits + (modes_signaled ? 2.0 * blocks : 0.0)) /
                    static_cast<double>(image_pixels);
    return est;
}

std::vector<std::int64_t> pooled_indices(const EncodedStream& stream) {
    std::vector<std::int64_t> out;
    out.reserve(stream.blocks.size() * stream.header.measurement_count);
    for (const BlockPayload& b : stream.blocks)
        out.insert(out.end(), b.indices.begin(), b.indices.end());
    return out;
}

} // namespace sdpc
