#pragma once

#include <Eigen/Core>

#include "sdpc/image.hpp"
#include "sdpc/sensing.hpp"

namespace sdpc {

// Smoothed projected-Landweber style recovery: per iteration an adaptive
// Wiener smoothing, a per-block Landweber data step, a hard threshold of the
// orthonormal block-DCT coefficients at the current tau, a second Landweber
// step, then tau decays geometrically.
struct RecoveryConfig {
    int max_iters = 200;
    double stop_tol = 1e-4;          // relative change per iteration
    double initial_threshold = 8.0;  // tau_0
    double threshold_decay = 0.95;   // in (0, 1)
    int smoothing_window = 3;        // odd, >= 3
    // When set, tau_0 is lifted to 3x a robust (MAD) estimate of the AC
    // DCT-coefficient noise in the initial back-projection whenever that is
    // larger than initial_threshold. At low subrates the null-space error
    // dwarfs the quantization scale and a fixed 2q+8 start never flattens it.
    bool data_driven_start = true;

    // Defaults tied to the quantizer step: tau_0 = 2q + 8.
    static RecoveryConfig defaults_for_step(double q);
};

struct RecoveryResult {
    Image image;
    int iterations = 0;
    bool converged = false;
    double final_change = 0.0;
};

// Per-block transpose back-projection Phi^T x~ assembled on the padded pixel
// grid; for orthonormal rows this is the pseudo-inverse projection.
Eigen::MatrixXd init_estimate(const MeasurementGrid& grid,
                              const SensingMatrix& matrix);

RecoveryResult recover(const MeasurementGrid& grid, const SensingMatrix& matrix,
                       const RecoveryConfig& cfg);

// Orthonormal DCT-II matrix of the given size.
Eigen::MatrixXd dct_matrix(int size);

// Local adaptive Wiener filter (box window, noise floor = median local
// variance). Exposed for direct testing.
Eigen::MatrixXd wiener_smooth(const Eigen::Ref<const Eigen::MatrixXd>& img,
                              int window);

// 10 log10(255^2 / MSE); +infinity when the images are identical.
double psnr(const Image& a, const Image& b);

} // namespace sdpc
