#include "sdpc/sensing.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sdpc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// 53-bit uniform in [0, 1) from one 64-bit draw.
double to_unit_double(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

} // namespace

Eigen::MatrixXd gaussian_draw(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd m(rows, cols);
    double cached = 0.0;
    bool has_cached = false;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (has_cached) {
                m(r, c) = cached;
                has_cached = false;
                continue;
            }
            double u1 = to_unit_double(rng());
            const double u2 = to_unit_double(rng());
            if (u1 <= 0.0) u1 = 0x1.0p-53;
            const double radius = std::sqrt(-2.0 * std::log(u1));
            m(r, c) = radius * std::cos(kTwoPi * u2);
            cached = radius * std::sin(kTwoPi * u2);
            has_cached = true;
        }
    }
    return m;
}

bool orthonormalize_rows(Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double original_norm = m.row(i).norm();
        if (original_norm == 0.0) return false;
        // One reorthogonalization pass keeps the Gram matrix at identity to
        // well below the 1e-9 contract even for M_B close to B^2.
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index j = 0; j < i; ++j)
                m.row(i) -= m.row(j).dot(m.row(i)) * m.row(j);
        const double remaining = m.row(i).norm();
        if (remaining <= original_norm * 1e-10) return false;
        m.row(i) /= remaining;
    }
    // Sign convention: first nonzero entry of each row positive.
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            if (m(i, k) != 0.0) {
                if (m(i, k) < 0.0) m.row(i) = -m.row(i);
                break;
            }
        }
    }
    return true;
}

int measurements_for_subrate(int block_size, double subrate) {
    if (block_size < 2) throw std::invalid_argument("block size must be at least 2");
    if (!(subrate > 0.0) || subrate > 1.0)
        throw std::invalid_argument("subrate must be in (0, 1]");
    const double exact = subrate * block_size * block_size;
    const int m = static_cast<int>(std::floor(exact + 0.5)); // ties up
    if (m < 1) throw std::invalid_argument("subrate yields zero measurements");
    return std::min(m, block_size * block_size);
}

SensingMatrix generate_matrix_mb(int block_size, int measurement_count,
                                 std::uint64_t seed) {
    if (block_size < 2) throw std::invalid_argument("block size must be at least 2");
    const Eigen::Index n = static_cast<Eigen::Index>(block_size) * block_size;
    if (measurement_count < 1 || measurement_count > n)
        throw std::invalid_argument("measurement count out of range");

    for (int attempt = 0; attempt <= 8; ++attempt) {
        Eigen::MatrixXd draw = gaussian_draw(measurement_count, n, seed + attempt);
        if (orthonormalize_rows(draw))
            return SensingMatrix{block_size, std::move(draw), seed};
    }
    throw std::runtime_error("degenerate sensing matrix draw after 8 retries");
}

SensingMatrix generate_matrix(int block_size, double subrate, std::uint64_t seed) {
    return generate_matrix_mb(block_size, measurements_for_subrate(block_size, subrate), seed);
}

Eigen::VectorXd measure(const SensingMatrix& matrix,
                        const Eigen::Ref<const Eigen::VectorXd>& block) {
    if (block.size() != matrix.rows.cols())
        throw std::invalid_argument("block length does not match sensing matrix");
    return matrix.rows * block;
}

MeasurementGrid measure_image(const SensingMatrix& matrix, const BlockSet& blocks) {
    if (blocks.columns.rows() != matrix.rows.cols())
        throw std::invalid_argument("block length does not match sensing matrix");
    MeasurementGrid grid;
    grid.lattice = blocks.lattice;
    grid.original_width = blocks.original_width;
    grid.original_height = blocks.original_height;
    grid.measurements = matrix.rows * blocks.columns;
    return grid;
}

} // namespace sdpc
