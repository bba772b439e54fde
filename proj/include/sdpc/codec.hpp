#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sdpc/bitstream.hpp"
#include "sdpc/image.hpp"
#include "sdpc/sensing.hpp"

namespace sdpc {

// Midtread uniform scalar quantizer: s = round(d / step) with halves rounded
// away from zero; reconstruction is step * s, so zero is a reconstruction
// level and the per-component error never exceeds step / 2.
struct Quantizer {
    double step = 1.0;
};

std::vector<std::int64_t> quantize(const Quantizer& q,
                                   const Eigen::Ref<const Eigen::VectorXd>& residual);
Eigen::VectorXd dequantize(const Quantizer& q, std::span<const std::int64_t> indices);

struct CodecConfig {
    ModePolicy mode_policy = ModePolicy::SdpcAll4;
    int block_size = 16;
    double subrate = 0.5;
    double step = 8.0;
    std::uint64_t seed = 1;
    ScanOrder scan_order = ScanOrder::Raster;
    // Candidate modes the encoder may pick from (SdpcAll4 only); border
    // availability still applies on top of this set. Indexed by mode code.
    std::array<bool, 4> allowed_modes{true, true, true, true};
};

struct Candidate {
    PredictionMode mode;
    Eigen::VectorXd prediction;
};

// Candidates in ascending mode-code order; empty only for the first block.
using CandidateSet = std::vector<Candidate>;

// Prediction vector of one directional mode from already reconstructed
// neighbors. The caller must have checked availability.
Eigen::VectorXd predict_mode(const MeasurementGrid& grid, int block_row,
                             int block_col, PredictionMode mode);

bool mode_available(PredictionMode mode, int block_row, int block_col);

CandidateSet build_candidates(const MeasurementGrid& grid, int block_row,
                              int block_col);
CandidateSet build_candidates(const MeasurementGrid& grid, int block_row,
                              int block_col, const std::array<bool, 4>& allowed);

struct ModeChoice {
    std::optional<PredictionMode> mode; // none for an empty candidate set
    Eigen::VectorXd prediction;
    double residual_l1 = 0.0;
};

// Candidate minimizing the l1 residual against x; ties go to the lowest mode
// code. An empty set yields the zero prediction.
ModeChoice select_mode(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const CandidateSet& candidates);

struct EncoderReport {
    // Chosen mode per block; nullopt where no mode was selected (first block,
    // or policies without modes).
    std::vector<std::optional<PredictionMode>> block_modes;
    // l1 norm of the chosen predictor's residual, per block.
    std::vector<double> residual_l1;
    // l1 residual of the previous-block (scan order) predictor for blocks
    // where that predictor was in the candidate set, NaN elsewhere.
    std::vector<double> previous_block_l1;
    std::map<std::int64_t, std::size_t> index_histogram;

    std::array<std::size_t, 4> mode_counts() const;
};

struct EncodeOutput {
    EncodedStream stream;
    EncoderReport report;
    // In-loop state; `reconstructed` is the decoder drift reference.
    MeasurementGrid grid;
};

EncodeOutput encode(const Image& img, const CodecConfig& cfg);

// Replays the prediction loop from the transmitted stream. The returned grid
// has only `reconstructed` populated; it is bit-identical to the encoder's
// in-loop state.
MeasurementGrid decode_measurements(const EncodedStream& stream);

} // namespace sdpc
