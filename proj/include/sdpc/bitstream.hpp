#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sdpc/errors.hpp"
#include "sdpc/image.hpp"

namespace sdpc {

inline constexpr std::uint16_t kFormatVersion = 1;
// Version tag of the Gaussian draw + row orthonormalization recipe; decoders
// reject streams produced by a different recipe.
inline constexpr std::uint16_t kGeneratorVersion = 1;
inline constexpr std::uint8_t kMagic[4] = {'S', 'D', 'P', 'C'};

enum class ModePolicy : std::uint8_t {
    SdpcAll4 = 0,          // four directional candidates, 2-bit flag per block
    DpcmPreviousBlock = 1, // previous block in scan order, no flags
    NoPrediction = 2,      // zero prediction, no flags
};

const char* mode_policy_name(ModePolicy policy);

enum class PredictionMode : std::uint8_t {
    Vertical = 0,
    Horizontal = 1,
    DC = 2,
    Diagonal = 3,
};

const char* prediction_mode_name(PredictionMode mode);

struct StreamHeader {
    std::uint16_t format_version = kFormatVersion;
    std::uint16_t generator_version = kGeneratorVersion;
    std::uint32_t width = 0; // original image dimensions
    std::uint32_t height = 0;
    std::uint16_t block_size = 0;
    std::uint32_t measurement_count = 0; // M_B
    ScanOrder scan_order = ScanOrder::Raster;
    ModePolicy mode_policy = ModePolicy::SdpcAll4;
    double step = 0.0; // quantizer step q, binary64 in the file
    std::uint64_t seed = 0;

    bool signals_modes() const { return mode_policy == ModePolicy::SdpcAll4; }
    BlockLattice lattice() const;
    int block_count() const;
};

// Serialized header size in bytes.
inline constexpr std::size_t kHeaderSize = 40;

struct BlockPayload {
    // Present iff the policy signals modes.
    std::optional<PredictionMode> mode;
    // M_B quantizer indices. Serialized as signed order-0 Exp-Golomb with the
    // mapping s -> 2s-1 for s > 0 and s -> -2s for s <= 0.
    std::vector<std::int64_t> indices;
};

struct EncodedStream {
    StreamHeader header;
    std::vector<BlockPayload> blocks;
};

// Deterministic, byte-for-byte reproducible serialization. Bits are packed
// most-significant first; the final partial byte is zero-padded.
std::vector<std::uint8_t> write_stream(const EncodedStream& stream);
EncodedStream read_stream(std::span<const std::uint8_t> bytes);

void write_stream_file(const std::string& path, const EncodedStream& stream);
EncodedStream read_stream_file(const std::string& path);

struct RateEstimate {
    double entropy_bits_per_index = 0.0;
    double index_bits = 0.0;
    double mode_overhead_bpp = 0.0; // 2/B^2 when modes are signaled, else 0
    double total_bpp = 0.0;
    double total_bpp_no_modes = 0.0;
};

// Empirical Shannon entropy (base 2) of the pooled index histogram, scaled to
// bits per pixel of the original image; 2 bits per coded block are added when
// modes are signaled.
RateEstimate estimate_rate(std::span<const std::int64_t> indices, int block_size,
                           int measurement_count, std::int64_t image_pixels,
                           bool modes_signaled);

// Pooled indices of a stream, block by block in scan order.
std::vector<std::int64_t> pooled_indices(const EncodedStream& stream);

// MSB-first bit packing helpers used by the payload body.
class BitWriter {
public:
    void put_bit(bool bit);
    void put_bits(std::uint64_t value, int count); // most-significant first
    std::size_t bit_count() const { return bytes_.size() * 8 + used_; }
    // Zero-pads any final partial byte and returns the buffer.
    std::vector<std::uint8_t> finish();

private:
    std::vector<std::uint8_t> bytes_;
    std::uint8_t acc_ = 0;
    int used_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    // Throw StreamFormatError{Truncated} on exhaustion.
    bool get_bit();
    std::uint64_t get_bits(int count);
    std::size_t bits_consumed() const { return consumed_; }
    // True when every unread bit is a zero pad within the final byte.
    bool only_zero_padding_left() const;

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t consumed_ = 0;
};

void put_signed_exp_golomb(BitWriter& writer, std::int64_t value);
std::int64_t get_signed_exp_golomb(BitReader& reader);

} // namespace sdpc
