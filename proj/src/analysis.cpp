#include "sdpc/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sdpc/bitstream.hpp"

namespace sdpc {

double correlation(const Eigen::Ref<const Eigen::VectorXd>& u,
                   const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (u.size() != v.size()) throw std::invalid_argument("correlation: length mismatch");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return u.dot(v) / (nu * nv);
}

CorrelationReport acc_study(const Image& img, int block_size, double subrate,
                            std::uint64_t seed, ScanOrder order) {
    const BlockSet blocks = to_blocks(img, block_size, order);
    const SensingMatrix matrix = generate_matrix(block_size, subrate, seed);
    MeasurementGrid grid = measure_image(matrix, blocks);
    // q -> 0 limit: the closed loop predicts from exact measurements.
    grid.reconstructed = grid.measurements;

    const int n = grid.lattice.count();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    CorrelationReport report;
    report.cc_previous.assign(static_cast<std::size_t>(n), nan);
    report.cc_prediction.assign(static_cast<std::size_t>(n), nan);

    double sum_prev = 0.0;
    double sum_pred = 0.0;
    std::size_t count_prev = 0;

    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd x = grid.measurements.col(i);
        if (i > 0) {
            const double cc = correlation(x, grid.measurements.col(i - 1));
            report.cc_previous[static_cast<std::size_t>(i)] = cc;
            sum_prev += cc;
            ++count_prev;
        } else {
            ++report.excluded_previous;
        }

        const auto [row, col] = grid.lattice.block_position(i);
        const CandidateSet candidates = build_candidates(grid, row, col);
        if (candidates.empty()) {
            ++report.excluded_prediction;
            continue;
        }
        const ModeChoice choice = select_mode(x, candidates);
        const double cc = correlation(x, choice.prediction);
        report.cc_prediction[static_cast<std::size_t>(i)] = cc;
        sum_pred += cc;
        ++report.mode_counts[static_cast<std::size_t>(*choice.mode)];
        ++report.selected_blocks;
    }

    report.acc_previous = count_prev > 0 ? sum_prev / static_cast<double>(count_prev) : 0.0;
    report.acc_prediction =
        report.selected_blocks > 0 ? sum_pred / static_cast<double>(report.selected_blocks) : 0.0;
    for (std::size_t m = 0; m < 4; ++m)
        report.mode_percent[m] =
            report.selected_blocks > 0
                ? 100.0 * static_cast<double>(report.mode_counts[m]) /
                      static_cast<double>(report.selected_blocks)
                : 0.0;
    return report;
}

ModePolicy policy_for_label(const std::string& label) {
    if (label == kLabelSq) return ModePolicy::NoPrediction;
    if (label == kLabelDpcm) return ModePolicy::DpcmPreviousBlock;
    if (label == kLabelSdpc) return ModePolicy::SdpcAll4;
    throw std::invalid_argument("unknown config label: " + label);
}

namespace {

RdPoint run_rd_point(const Image& img, const std::string& image_name,
                     const RdConfig& rc, std::uint64_t seed, int block_size,
                     const RecoveryConfig* recovery_override) {
    CodecConfig cfg;
    cfg.mode_policy = rc.policy;
    cfg.block_size = block_size;
    cfg.subrate = rc.subrate;
    cfg.step = rc.step;
    cfg.seed = seed;
    cfg.scan_order = rc.scan;

    const EncodeOutput enc = encode(img, cfg);
    const auto indices = pooled_indices(enc.stream);
    const RateEstimate est =
        estimate_rate(indices, block_size, static_cast<int>(enc.stream.header.measurement_count),
                      img.pixel_count(), enc.stream.header.signals_modes());

    const auto bytes = write_stream(enc.stream);
    // An Exp-Golomb payload can never undercut the pooled-histogram entropy.
    if (static_cast<double>(bytes.size()) * 8.0 < est.index_bits)
        throw std::logic_error("rd_sweep: serialized size fell below the entropy estimate");

    const EncodedStream parsed = read_stream(bytes);
    MeasurementGrid grid = decode_measurements(parsed);
    if (grid.reconstructed != enc.grid.reconstructed)
        throw std::logic_error("rd_sweep: decoder drifted from the encoder loop");

    const SensingMatrix matrix = generate_matrix(block_size, rc.subrate, seed);
    const RecoveryConfig rcfg =
        recovery_override ? *recovery_override : RecoveryConfig::defaults_for_step(rc.step);
    const RecoveryResult res = recover(grid, matrix, rcfg);

    RdPoint point;
    point.image = image_name;
    point.label = rc.label;
    point.scan = rc.scan;
    point.step = rc.step;
    point.subrate = rc.subrate;
    point.bpp = est.total_bpp;
    point.bpp_no_modes = est.total_bpp_no_modes;
    point.psnr_db = psnr(res.image, img);
    point.iterations = res.iterations;
    point.converged = res.converged;
    point.seed = seed;
    return point;
}

} // namespace

std::vector<RdPoint> rd_sweep(const Image& img, const std::string& image_name,
                              const std::vector<RdConfig>& configs,
                              std::uint64_t seed, int block_size,
                              const RecoveryConfig* recovery_override, int threads) {
    std::vector<RdPoint> points(configs.size());
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(configs.size())));

    if (workers == 1) {
        for (std::size_t i = 0; i < configs.size(); ++i)
            points[i] = run_rd_point(img, image_name, configs[i], seed, block_size,
                                     recovery_override);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= configs.size()) return;
                    try {
                        points[i] = run_rd_point(img, image_name, configs[i], seed,
                                                 block_size, recovery_override);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    std::stable_sort(points.begin(), points.end(), [](const RdPoint& a, const RdPoint& b) {
        if (a.label != b.label) return a.label < b.label;
        if (a.step != b.step) return a.step < b.step;
        if (a.scan != b.scan) return a.scan < b.scan;
        return a.seed < b.seed;
    });
    return points;
}

void write_rd_csv(std::ostream& out, const std::vector<RdPoint>& points) {
    out << "image,label,scan,q,subrate,bpp,bpp_no_modes,psnr_db,iters,converged,seed\n";
    for (const RdPoint& p : points) {
        std::ostringstream line;
        line.precision(10);
        line << p.image << ',' << p.label << ',' << scan_order_name(p.scan) << ','
             << p.step << ',' << p.subrate << ',' << p.bpp << ',' << p.bpp_no_modes << ',';
        if (std::isinf(p.psnr_db))
            line << "inf";
        else
            line << p.psnr_db;
        line << ',' << p.iterations << ',' << (p.converged ? 1 : 0) << ',' << p.seed << '\n';
        out << line.str();
    }
}

double interpolate_psnr_at_bpp(const std::vector<RdPoint>& curve, double bpp) {
    std::vector<const RdPoint*> sorted;
    sorted.reserve(curve.size());
    for (const RdPoint& p : curve) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(),
              [](const RdPoint* a, const RdPoint* b) { return a->bpp < b->bpp; });

    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (sorted.empty()) return nan;
    if (bpp < sorted.front()->bpp || bpp > sorted.back()->bpp) return nan;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const RdPoint* lo = sorted[i];
        const RdPoint* hi = sorted[i + 1];
        if (bpp >= lo->bpp && bpp <= hi->bpp) {
            if (hi->bpp == lo->bpp) return std::max(lo->psnr_db, hi->psnr_db);
            const double t = (bpp - lo->bpp) / (hi->bpp - lo->bpp);
            return lo->psnr_db + t * (hi->psnr_db - lo->psnr_db);
        }
    }
    return sorted.back()->psnr_db;
}

} // namespace sdpc
