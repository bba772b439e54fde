#include "sdpc/codec.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sdpc {

namespace {

void validate_config(const CodecConfig& cfg) {
    if (cfg.block_size < 2) throw std::invalid_argument("codec: block size must be at least 2");
    if (!(cfg.step > 0.0) || !std::isfinite(cfg.step))
        throw std::invalid_argument("codec: quantizer step must be positive and finite");
    if (!(cfg.subrate > 0.0) || cfg.subrate > 1.0)
        throw std::invalid_argument("codec: subrate must be in (0, 1]");
}

// Flag written for the first block, which has no causal neighbors; the
// decoder derives the zero prediction from the position and ignores the
// value. Keeping a fixed flag keeps the payload framing uniform.
constexpr PredictionMode kFirstBlockFlag = PredictionMode::Horizontal;

} // namespace

std::vector<std::int64_t> quantize(const Quantizer& q,
                                   const Eigen::Ref<const Eigen::VectorXd>& residual) {
    if (!(q.step > 0.0)) throw std::invalid_argument("quantize: step must be positive");
    std::vector<std::int64_t> indices(static_cast<std::size_t>(residual.size()));
    for (Eigen::Index k = 0; k < residual.size(); ++k) {
        const double d = residual[k];
        if (!std::isfinite(d)) throw std::domain_error("quantize: non-finite residual component");
        const double scaled = d / q.step;
        if (std::abs(scaled) >= 9.0e18)
            throw std::domain_error("quantize: residual overflows index range");
        indices[static_cast<std::size_t>(k)] = std::llround(scaled);
    }
    return indices;
}

Eigen::VectorXd dequantize(const Quantizer& q, std::span<const std::int64_t> indices) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k)
        d[static_cast<Eigen::Index>(k)] = q.step * static_cast<double>(indices[k]);
    return d;
}

bool mode_available(PredictionMode mode, int block_row, int block_col) {
    switch (mode) {
        case PredictionMode::Vertical: return block_row > 0;
        case PredictionMode::Horizontal: return block_col > 0;
        case PredictionMode::DC:
        case PredictionMode::Diagonal: return block_row > 0 && block_col > 0;
    }
    return false;
}

Eigen::VectorXd predict_mode(const MeasurementGrid& grid, int block_row,
                             int block_col, PredictionMode mode) {
    const BlockLattice& lat = grid.lattice;
    const Eigen::MatrixXd& recon = grid.reconstructed;
    const auto col_of = [&](int r, int c) { return recon.col(lat.scan_index(r, c)); };
    switch (mode) {
        case PredictionMode::Vertical:
            return col_of(block_row - 1, block_col);
        case PredictionMode::Horizontal:
            return col_of(block_row, block_col - 1);
        case PredictionMode::DC:
            return 0.5 * (col_of(block_row - 1, block_col) + col_of(block_row, block_col - 1));
        case PredictionMode::Diagonal:
            return col_of(block_row - 1, block_col - 1);
    }
    throw std::invalid_argument("predict_mode: unknown mode");
}

CandidateSet build_candidates(const MeasurementGrid& grid, int block_row,
                              int block_col, const std::array<bool, 4>& allowed) {
    CandidateSet out;
    for (int code = 0; code < 4; ++code) {
        const auto mode = static_cast<PredictionMode>(code);
        if (!allowed[static_cast<std::size_t>(code)]) continue;
        if (!mode_available(mode, block_row, block_col)) continue;
        out.push_back(Candidate{mode, predict_mode(grid, block_row, block_col, mode)});
    }
    return out;
}

CandidateSet build_candidates(const MeasurementGrid& grid, int block_row, int block_col) {
    return build_candidates(grid, block_row, block_col, {true, true, true, true});
}

ModeChoice select_mode(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const CandidateSet& candidates) {
    if (candidates.empty())
        return ModeChoice{std::nullopt, Eigen::VectorXd::Zero(x.size()), x.lpNorm<1>()};

    const Candidate* best = nullptr;
    double best_l1 = 0.0;
    for (const Candidate& cand : candidates) {
        const double l1 = (cand.prediction - x).lpNorm<1>();
        if (best == nullptr || l1 < best_l1 ||
            (l1 == best_l1 && cand.mode < best->mode)) {
            best = &cand;
            best_l1 = l1;
        }
    }
    return ModeChoice{best->mode, best->prediction, best_l1};
}

std::array<std::size_t, 4> EncoderReport::mode_counts() const {
    std::array<std::size_t, 4> counts{};
    for (const auto& m : block_modes)
        if (m) ++counts[static_cast<std::size_t>(*m)];
    return counts;
}

EncodeOutput encode(const Image& img, const CodecConfig& cfg) {
    validate_config(cfg);

    const BlockSet blocks = to_blocks(img, cfg.block_size, cfg.scan_order);
    const SensingMatrix matrix = generate_matrix(cfg.block_size, cfg.subrate, cfg.seed);

    EncodeOutput out;
    out.grid = measure_image(matrix, blocks);
    const int n = out.grid.lattice.count();
    const Eigen::Index m = matrix.measurement_count();
    out.grid.reconstructed = Eigen::MatrixXd::Zero(m, n);

    StreamHeader header;
    header.width = static_cast<std::uint32_t>(img.width);
    header.height = static_cast<std::uint32_t>(img.height);
    header.block_size = static_cast<std::uint16_t>(cfg.block_size);
    header.measurement_count = static_cast<std::uint32_t>(m);
    header.scan_order = cfg.scan_order;
    header.mode_policy = cfg.mode_policy;
    header.step = cfg.step;
    header.seed = cfg.seed;
    out.stream.header = header;
    out.stream.blocks.reserve(static_cast<std::size_t>(n));

    out.report.block_modes.reserve(static_cast<std::size_t>(n));
    out.report.residual_l1.reserve(static_cast<std::size_t>(n));
    out.report.previous_block_l1.reserve(static_cast<std::size_t>(n));

    const Quantizer quant{cfg.step};
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (int i = 0; i < n; ++i) {
        const auto [row, col] = out.grid.lattice.block_position(i);
        const Eigen::VectorXd x = out.grid.measurements.col(i);

        Eigen::VectorXd prediction;
        std::optional<PredictionMode> flag;
        std::optional<PredictionMode> chosen;
        double chosen_l1 = 0.0;
        double previous_l1 = nan;

        switch (cfg.mode_policy) {
            case ModePolicy::SdpcAll4: {
                const CandidateSet candidates = build_candidates(out.grid, row, col, cfg.allowed_modes);
                ModeChoice choice = select_mode(x, candidates);
                prediction = std::move(choice.prediction);
                chosen = choice.mode;
                chosen_l1 = choice.residual_l1;
                flag = choice.mode ? *choice.mode : kFirstBlockFlag;
                // Previous block in scan order: the left neighbor under
                // raster, the up neighbor under column-major. Defined here
                // only when that neighbor is actually in the candidate set.
                const PredictionMode prev_mode =
                    cfg.scan_order == ScanOrder::Raster ? PredictionMode::Horizontal
                                                        : PredictionMode::Vertical;
                for (const Candidate& cand : candidates) {
                    if (cand.mode == prev_mode) {
                        previous_l1 = (cand.prediction - x).lpNorm<1>();
                        break;
                    }
                }
                break;
            }
            case ModePolicy::DpcmPreviousBlock: {
                prediction = i == 0 ? Eigen::VectorXd::Zero(m).eval()
                                    : out.grid.reconstructed.col(i - 1).eval();
                chosen_l1 = (prediction - x).lpNorm<1>();
                break;
            }
            case ModePolicy::NoPrediction: {
                prediction = Eigen::VectorXd::Zero(m);
                chosen_l1 = x.lpNorm<1>();
                break;
            }
        }

        const Eigen::VectorXd residual = x - prediction;
        std::vector<std::int64_t> indices = quantize(quant, residual);
        out.grid.reconstructed.col(i) = prediction + dequantize(quant, indices);

        for (const std::int64_t s : indices) ++out.report.index_histogram[s];
        out.report.block_modes.push_back(chosen);
        out.report.residual_l1.push_back(chosen_l1);
        out.report.previous_block_l1.push_back(previous_l1);
        out.stream.blocks.push_back(BlockPayload{flag, std::move(indices)});
    }
    return out;
}

MeasurementGrid decode_measurements(const EncodedStream& stream) {
    const StreamHeader& h = stream.header;
    const BlockLattice lattice = h.lattice();
    const int n = lattice.count();
    if (stream.blocks.size() != static_cast<std::size_t>(n))
        throw StreamFormatError(StreamError::Truncated, "decode: block count does not match header");

    MeasurementGrid grid;
    grid.lattice = lattice;
    grid.original_width = static_cast<int>(h.width);
    grid.original_height = static_cast<int>(h.height);
    grid.reconstructed =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h.measurement_count), n);

    const Quantizer quant{h.step};

    for (int i = 0; i < n; ++i) {
        const BlockPayload& block = stream.blocks[static_cast<std::size_t>(i)];
        if (block.mode.has_value() != h.signals_modes())
            throw StreamFormatError(StreamError::BadModeCode,
                                    "decode: mode flag presence does not match policy", i);
        if (block.indices.size() != h.measurement_count)
            throw StreamFormatError(StreamError::Truncated,
                                    "decode: index count does not match header", i);

        const auto [row, col] = lattice.block_position(i);
        Eigen::VectorXd prediction;

        switch (h.mode_policy) {
            case ModePolicy::SdpcAll4: {
                if (row == 0 && col == 0) {
                    // First block: flag is framing filler, prediction is zero.
                    prediction = Eigen::VectorXd::Zero(h.measurement_count);
                } else {
                    const PredictionMode mode = *block.mode;
                    if (!mode_available(mode, row, col))
                        throw StreamFormatError(
                            StreamError::BadModeCode,
                            std::string("decode: mode ") + prediction_mode_name(mode) +
                                " not available at block " + std::to_string(i),
                            i);
                    prediction = predict_mode(grid, row, col, mode);
                }
                break;
            }
            case ModePolicy::DpcmPreviousBlock:
                prediction = i == 0
                                 ? Eigen::VectorXd::Zero(h.measurement_count).eval()
                                 : grid.reconstructed.col(i - 1).eval();
                break;
            case ModePolicy::NoPrediction:
                prediction = Eigen::VectorXd::Zero(h.measurement_count);
                break;
        }

        grid.reconstructed.col(i) = prediction + dequantize(quant, block.indices);
    }
    return grid;
}

} // namespace sdpc
