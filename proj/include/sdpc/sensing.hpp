#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "sdpc/image.hpp"

namespace sdpc {

// Block measurement matrix with orthonormal rows, shared by all blocks. The
// matrix itself is never serialized; streams carry (B, M_B, seed) plus the
// generator version and both sides regenerate it.
struct SensingMatrix {
    int block_size = 0;
    Eigen::MatrixXd rows; // M_B x B^2
    std::uint64_t seed = 0;

    Eigen::Index measurement_count() const { return rows.rows(); }
    double subrate() const {
        return static_cast<double>(rows.rows()) / static_cast<double>(rows.cols());
    }
};

// Per-block measurement vectors on the block lattice. `measurements` holds
// the sensed x^(i) as columns in scan order; `reconstructed` holds the
// causally coded x~^(i) once a coding pass has populated them (0x0 before).
struct MeasurementGrid {
    BlockLattice lattice;
    int original_width = 0;
    int original_height = 0;
    Eigen::MatrixXd measurements;
    Eigen::MatrixXd reconstructed;
};

// M_B = round(S * B^2), ties rounded up. Throws if the result is not in
// [1, B^2] or S is outside (0, 1].
int measurements_for_subrate(int block_size, double subrate);

SensingMatrix generate_matrix(int block_size, double subrate, std::uint64_t seed);
SensingMatrix generate_matrix_mb(int block_size, int measurement_count,
                                 std::uint64_t seed);

// Deterministic standard-normal draw used by generate_matrix: mt19937_64 and
// a Box-Muller pair per two entries, filled row-major. Frozen under
// kGeneratorVersion.
Eigen::MatrixXd gaussian_draw(Eigen::Index rows, Eigen::Index cols,
                              std::uint64_t seed);

// In-place row orthonormalization: Gram-Schmidt in row order with one
// reorthogonalization pass, then each row's sign fixed so its first nonzero
// entry is positive. Returns false when the rows are numerically rank
// deficient.
bool orthonormalize_rows(Eigen::MatrixXd& m);

Eigen::VectorXd measure(const SensingMatrix& matrix,
                        const Eigen::Ref<const Eigen::VectorXd>& block);

MeasurementGrid measure_image(const SensingMatrix& matrix, const BlockSet& blocks);

} // namespace sdpc
