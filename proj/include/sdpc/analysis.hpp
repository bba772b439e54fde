#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdpc/codec.hpp"
#include "sdpc/image.hpp"
#include "sdpc/recovery.hpp"

namespace sdpc {

// Normalized inner product u.v / (|u||v|); 0 when either vector is zero
// (mathematically undefined; 0 is the neutral reporting choice).
double correlation(const Eigen::Ref<const Eigen::VectorXd>& u,
                   const Eigen::Ref<const Eigen::VectorXd>& v);

struct CorrelationReport {
    // Per block in scan order; NaN where the needed neighbor is missing.
    std::vector<double> cc_previous;   // CC1: against the previous scan block
    std::vector<double> cc_prediction; // CC2: against the selected predictor
    double acc_previous = 0.0;         // means over the defined entries
    double acc_prediction = 0.0;
    int excluded_previous = 0;
    int excluded_prediction = 0;
    std::array<std::size_t, 4> mode_counts{};
    std::array<double, 4> mode_percent{}; // over blocks with a selection
    std::size_t selected_blocks = 0;
};

// Mode selection and correlation statistics on clean (unquantized)
// measurements, the q -> 0 limit of the closed loop.
CorrelationReport acc_study(const Image& img, int block_size, double subrate,
                            std::uint64_t seed, ScanOrder order);

struct RdConfig {
    std::string label; // "SQ" | "DPCM+SQ" | "SDPC+SQ"
    ModePolicy policy = ModePolicy::SdpcAll4;
    double step = 8.0;
    double subrate = 0.5;
    ScanOrder scan = ScanOrder::Raster;
};

struct RdPoint {
    std::string image;
    std::string label;
    ScanOrder scan = ScanOrder::Raster;
    double step = 0.0;
    double subrate = 0.0;
    double bpp = 0.0; // entropy estimate, mode overhead included when signaled
    double bpp_no_modes = 0.0;
    double psnr_db = 0.0;
    int iterations = 0;
    bool converged = false;
    std::uint64_t seed = 0;
};

// encode -> estimate_rate -> serialize/parse -> decode -> recover -> psnr for
// each config. Points are computed independently (optionally in parallel) and
// returned sorted by label then step.
std::vector<RdPoint> rd_sweep(const Image& img, const std::string& image_name,
                              const std::vector<RdConfig>& configs,
                              std::uint64_t seed, int block_size,
                              const RecoveryConfig* recovery_override = nullptr,
                              int threads = 1);

// Fixed column order; `seed` is appended last to keep the leading columns
// stable for downstream diffing.
void write_rd_csv(std::ostream& out, const std::vector<RdPoint>& points);

// Linear interpolation of PSNR at the given bpp on one label's curve
// (points sorted by bpp). NaN when bpp is outside the curve's range.
double interpolate_psnr_at_bpp(const std::vector<RdPoint>& curve, double bpp);

// Standard config labels.
inline constexpr const char* kLabelSq = "SQ";
inline constexpr const char* kLabelDpcm = "DPCM+SQ";
inline constexpr const char* kLabelSdpc = "SDPC+SQ";

ModePolicy policy_for_label(const std::string& label);

} // namespace sdpc
