#include "sdpc/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sdpc {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Eigen::MatrixXd blocks_to_padded(const Eigen::MatrixXd& columns, const BlockLattice& lat) {
    const int B = lat.block_size;
    Eigen::MatrixXd img(static_cast<Eigen::Index>(lat.blocks_y) * B,
                        static_cast<Eigen::Index>(lat.blocks_x) * B);
    for (int i = 0; i < lat.count(); ++i) {
        const auto [br, bc] = lat.block_position(i);
        img.block(static_cast<Eigen::Index>(br) * B, static_cast<Eigen::Index>(bc) * B, B, B) =
            RowMajorMap(columns.col(i).data(), B, B);
    }
    return img;
}

Eigen::MatrixXd padded_to_blocks(const Eigen::MatrixXd& img, const BlockLattice& lat) {
    const int B = lat.block_size;
    Eigen::MatrixXd columns(static_cast<Eigen::Index>(B) * B, lat.count());
    for (int i = 0; i < lat.count(); ++i) {
        const auto [br, bc] = lat.block_position(i);
        const auto block = img.block(static_cast<Eigen::Index>(br) * B,
                                     static_cast<Eigen::Index>(bc) * B, B, B);
        for (int py = 0; py < B; ++py)
            for (int px = 0; px < B; ++px)
                columns(static_cast<Eigen::Index>(py) * B + px, i) = block(py, px);
    }
    return columns;
}

// V <- V + Phi^T (X - Phi V). With orthonormal rows this lands exactly on the
// per-block data-consistency subspace.
void landweber_step(Eigen::MatrixXd& columns, const Eigen::MatrixXd& phi,
                    const Eigen::MatrixXd& measurements) {
    columns.noalias() += phi.transpose() * (measurements - phi * columns);
}

// Hard threshold of the per-block orthonormal DCT coefficients. The DC
// coefficient of each block is exempt so coarse late-stage thresholds cannot
// wipe out the block means of flat regions.
void threshold_blocks(Eigen::MatrixXd& columns, const Eigen::MatrixXd& dct, double tau) {
    const int B = static_cast<int>(dct.rows());
    Eigen::MatrixXd block(B, B);
    Eigen::MatrixXd coeff(B, B);
    for (Eigen::Index i = 0; i < columns.cols(); ++i) {
        block = RowMajorMap(columns.col(i).data(), B, B);
        coeff.noalias() = dct * block * dct.transpose();
        for (int r = 0; r < B; ++r)
            for (int c = 0; c < B; ++c)
                if (!(r == 0 && c == 0) && std::abs(coeff(r, c)) <= tau) coeff(r, c) = 0.0;
        block.noalias() = dct.transpose() * coeff * dct;
        for (int py = 0; py < B; ++py)
            for (int px = 0; px < B; ++px)
                columns(static_cast<Eigen::Index>(py) * B + px, i) = block(py, px);
    }
}

void check_grid_matrix(const MeasurementGrid& grid, const SensingMatrix& matrix) {
    if (grid.reconstructed.size() == 0)
        throw std::invalid_argument("recovery: grid has no decoded measurements");
    if (grid.reconstructed.cols() != grid.lattice.count())
        throw std::invalid_argument("recovery: block count mismatch");
    if (grid.reconstructed.rows() != matrix.rows.rows())
        throw std::invalid_argument("recovery: measurement length does not match matrix");
    if (matrix.rows.cols() !=
        static_cast<Eigen::Index>(grid.lattice.block_size) * grid.lattice.block_size)
        throw std::invalid_argument("recovery: matrix block size does not match lattice");
}

} // namespace

RecoveryConfig RecoveryConfig::defaults_for_step(double q) {
    RecoveryConfig cfg;
    cfg.initial_threshold = 2.0 * q + 8.0;
    return cfg;
}

Eigen::MatrixXd dct_matrix(int size) {
    if (size < 1) throw std::invalid_argument("dct_matrix: size must be positive");
    Eigen::MatrixXd d(size, size);
    const double pi = 3.14159265358979323846;
    for (int j = 0; j < size; ++j) {
        const double scale = std::sqrt((j == 0 ? 1.0 : 2.0) / size);
        for (int k = 0; k < size; ++k)
            d(j, k) = scale * std::cos(pi * (2.0 * k + 1.0) * j / (2.0 * size));
    }
    return d;
}

Eigen::MatrixXd wiener_smooth(const Eigen::Ref<const Eigen::MatrixXd>& img, int window) {
    if (window < 3 || window % 2 == 0)
        throw std::invalid_argument("wiener_smooth: window must be odd and >= 3");
    const Eigen::Index h = img.rows();
    const Eigen::Index w = img.cols();
    const int half = window / 2;

    // Inclusive prefix sums with a zero guard row/column.
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(h + 1, w + 1);
    Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(h + 1, w + 1);
    for (Eigen::Index y = 0; y < h; ++y) {
        double row_acc = 0.0;
        double row_acc2 = 0.0;
        for (Eigen::Index x = 0; x < w; ++x) {
            const double v = img(y, x);
            row_acc += v;
            row_acc2 += v * v;
            sum(y + 1, x + 1) = sum(y, x + 1) + row_acc;
            sum2(y + 1, x + 1) = sum2(y, x + 1) + row_acc2;
        }
    }
    const auto box = [&](const Eigen::MatrixXd& s, Eigen::Index y0, Eigen::Index y1,
                         Eigen::Index x0, Eigen::Index x1) {
        return s(y1 + 1, x1 + 1) - s(y0, x1 + 1) - s(y1 + 1, x0) + s(y0, x0);
    };

    Eigen::MatrixXd mean(h, w);
    Eigen::MatrixXd variance(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        const Eigen::Index y0 = std::max<Eigen::Index>(0, y - half);
        const Eigen::Index y1 = std::min<Eigen::Index>(h - 1, y + half);
        for (Eigen::Index x = 0; x < w; ++x) {
            const Eigen::Index x0 = std::max<Eigen::Index>(0, x - half);
            const Eigen::Index x1 = std::min<Eigen::Index>(w - 1, x + half);
            const double count = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
            const double mu = box(sum, y0, y1, x0, x1) / count;
            const double m2 = box(sum2, y0, y1, x0, x1) / count;
            mean(y, x) = mu;
            variance(y, x) = std::max(m2 - mu * mu, 0.0);
        }
    }

    // Noise floor: median local variance.
    std::vector<double> vars(variance.data(), variance.data() + variance.size());
    const std::size_t mid = vars.size() / 2;
    std::nth_element(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(mid), vars.end());
    const double noise = vars[mid];

    Eigen::MatrixXd out(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            const double var = variance(y, x);
            const double gain = var > noise && var > 0.0 ? (var - noise) / var : 0.0;
            out(y, x) = mean(y, x) + gain * (img(y, x) - mean(y, x));
        }
    }
    return out;
}

Eigen::MatrixXd init_estimate(const MeasurementGrid& grid, const SensingMatrix& matrix) {
    check_grid_matrix(grid, matrix);
    const Eigen::MatrixXd columns = matrix.rows.transpose() * grid.reconstructed;
    return blocks_to_padded(columns, grid.lattice);
}

RecoveryResult recover(const MeasurementGrid& grid, const SensingMatrix& matrix,
                       const RecoveryConfig& cfg) {
    check_grid_matrix(grid, matrix);
    if (cfg.max_iters < 1) throw std::invalid_argument("recovery: max_iters must be >= 1");
    if (!(cfg.initial_threshold > 0.0))
        throw std::invalid_argument("recovery: initial threshold must be positive");
    if (!(cfg.threshold_decay > 0.0) || !(cfg.threshold_decay < 1.0))
        throw std::invalid_argument("recovery: threshold decay must be in (0, 1)");
    if (cfg.smoothing_window < 3 || cfg.smoothing_window % 2 == 0)
        throw std::invalid_argument("recovery: smoothing window must be odd and >= 3");
    if (!(cfg.stop_tol >= 0.0)) throw std::invalid_argument("recovery: stop_tol must be >= 0");

    const BlockLattice& lat = grid.lattice;
    const Eigen::MatrixXd dct = dct_matrix(lat.block_size);

    Eigen::MatrixXd estimate = init_estimate(grid, matrix);

    double tau = cfg.initial_threshold;
    if (cfg.data_driven_start) {
        // Robust scale of the AC coefficients of the starting estimate:
        // sigma = 1.4826 * median(|c|). Starting at 3 sigma lets the early
        // iterations actually remove back-projection noise at low subrates.
        const int B = lat.block_size;
        std::vector<double> mags;
        mags.reserve(static_cast<std::size_t>(lat.count()) * (B * B - 1));
        Eigen::MatrixXd block(B, B);
        const Eigen::MatrixXd columns0 = padded_to_blocks(estimate, lat);
        for (Eigen::Index i = 0; i < columns0.cols(); ++i) {
            block = RowMajorMap(columns0.col(i).data(), B, B);
            const Eigen::MatrixXd coeff = dct * block * dct.transpose();
            for (int r = 0; r < B; ++r)
                for (int c = 0; c < B; ++c)
                    if (!(r == 0 && c == 0)) mags.push_back(std::abs(coeff(r, c)));
        }
        const std::size_t mid = mags.size() / 2;
        std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mid),
                         mags.end());
        tau = std::max(tau, 3.0 * 1.4826 * mags[mid]);
    }

    RecoveryResult result;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const Eigen::MatrixXd previous = estimate;

        estimate = wiener_smooth(estimate, cfg.smoothing_window);
        Eigen::MatrixXd columns = padded_to_blocks(estimate, lat);
        landweber_step(columns, matrix.rows, grid.reconstructed);
        threshold_blocks(columns, dct, tau);
        landweber_step(columns, matrix.rows, grid.reconstructed);
        estimate = blocks_to_padded(columns, lat);

        result.final_change =
            (estimate - previous).norm() / std::max(previous.norm(), 1e-12);
        result.iterations = iter;
        tau *= cfg.threshold_decay;
        if (result.final_change <= cfg.stop_tol) {
            result.converged = true;
            break;
        }
    }

    Image out;
    out.width = grid.original_width;
    out.height = grid.original_height;
    out.samples.resize(static_cast<std::size_t>(out.pixel_count()));
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const long long r = std::llround(estimate(y, x));
            out.at(y, x) = static_cast<std::uint8_t>(std::clamp(r, 0LL, 255LL));
        }
    result.image = std::move(out);
    return result;
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("psnr: dimension mismatch");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(a.samples.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

} // namespace sdpc
