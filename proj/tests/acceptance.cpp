// Acceptance suite: every criterion prints one PASS/FAIL line; the process
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdpc/analysis.hpp"
#include "sdpc/bitstream.hpp"
#include "sdpc/codec.hpp"
#include "sdpc/image.hpp"
#include "sdpc/recovery.hpp"
#include "test_util.hpp"

using namespace sdpc;

namespace {

std::string g_data_dir = SDPC_TEST_DATA_DIR;

const std::vector<std::string> kTestImages = {"camera", "moon", "astronaut"};
// The smooth low-detail image whose correlation means are compared against
// the reference band.
const std::string kSmoothImage = "moon";

Image load_test_image(const std::string& name) {
    return load_pgm_file(g_data_dir + "/" + name + ".pgm");
}

// ---------------------------------------------------------------------------

bool criterion_closed_loop(std::string& detail) {
    int cases = 0;
    for (const int block_size : {8, 16}) {
        for (const double subrate : {0.25, 0.5, 1.0}) {
            for (const double step : {1.0, 8.0, 32.0}) {
                for (int variant = 0; variant < 6; ++variant) {
                    const std::uint32_t tag =
                        static_cast<std::uint32_t>(cases * 131 + variant);
                    const int w = 32 + 8 * (variant % 3) + (variant == 5 ? 3 : 0);
                    const int h = 24 + 8 * (variant % 2) + (variant == 4 ? 5 : 0);
                    const Image img = variant % 2 == 0 ? test::random_image(w, h, tag)
                                                       : test::textured_image(w, h, tag);
                    CodecConfig cfg;
                    cfg.block_size = block_size;
                    cfg.subrate = subrate;
                    cfg.step = step;
                    cfg.seed = 1 + variant;
                    cfg.scan_order =
                        variant % 2 == 0 ? ScanOrder::Raster : ScanOrder::ColumnMajor;

                    const EncodeOutput enc = encode(img, cfg);
                    const auto bytes = write_stream(enc.stream);
                    const EncodedStream parsed = read_stream(bytes);
                    const MeasurementGrid dec = decode_measurements(parsed);
                    ++cases;
                    if (dec.reconstructed != enc.grid.reconstructed) {
                        detail = "decoder drifted from encoder at case " + std::to_string(cases);
                        return false;
                    }
                }
            }
        }
    }
    detail = std::to_string(cases) + " randomized cases bit-identical";
    return cases >= 100;
}

bool criterion_correlation(std::string& detail) {
    std::ostringstream msg;
    bool ok = true;
    for (const auto& name : kTestImages) {
        const Image img = load_test_image(name);
        const CorrelationReport rep = acc_study(img, 16, 0.5, 1, ScanOrder::Raster);
        msg << name << " ACC1 " << rep.acc_previous << " ACC2 " << rep.acc_prediction << "; ";
        if (!(rep.acc_prediction > rep.acc_previous)) ok = false;
        if (name == kSmoothImage) {
            if (std::abs(rep.acc_previous - 0.9713) > 0.03) ok = false;
            if (std::abs(rep.acc_prediction - 0.9777) > 0.03) ok = false;
        }
    }
    detail = msg.str();
    return ok;
}

bool criterion_mode_statistics(std::string& detail) {
    std::ostringstream msg;
    bool ok = true;
    for (const auto& name : kTestImages) {
        const Image img = load_test_image(name);
        const CorrelationReport rep = acc_study(img, 16, 0.5, 1, ScanOrder::Raster);
        const double sum = rep.mode_percent[0] + rep.mode_percent[1] + rep.mode_percent[2] +
                           rep.mode_percent[3];
        if (std::abs(sum - 100.0) > 1e-9) ok = false;
        msg << name << " [";
        for (int m = 0; m < 4; ++m) {
            if (rep.mode_percent[static_cast<std::size_t>(m)] <= 0.0) ok = false;
            msg << (m ? " " : "") << rep.mode_percent[static_cast<std::size_t>(m)] << "%";
        }
        msg << "]; ";
    }
    detail = msg.str();
    return ok;
}

double fit_step(const Image& img, ModePolicy policy, double subrate, double target_bpp) {
    double lo = 1e-2, hi = 1e6;
    for (int iter = 0; iter < 36; ++iter) {
        const double mid = std::sqrt(lo * hi);
        CodecConfig cfg;
        cfg.mode_policy = policy;
        cfg.block_size = 16;
        cfg.subrate = subrate;
        cfg.step = mid;
        cfg.seed = 1;
        const EncodeOutput enc = encode(img, cfg);
        const double bpp =
            estimate_rate(pooled_indices(enc.stream), 16,
                          static_cast<int>(enc.stream.header.measurement_count),
                          img.pixel_count(), enc.stream.header.signals_modes())
                .total_bpp;
        if (bpp > target_bpp)
            lo = mid;
        else
            hi = mid;
        if (hi / lo < 1.02) break;
    }
    return std::sqrt(lo * hi);
}

bool criterion_rd_ordering(std::string& detail) {
    constexpr double kSubrate = 0.25;
    constexpr int kGridPoints = 6;
    const std::vector<double> band{0.3, 0.4, 0.5};

    std::ostringstream msg;
    bool ok = true;
    double gain_sum = 0.0;
    int gain_count = 0;

    for (const auto& name : kTestImages) {
        const Image img = load_test_image(name);
        // shared q grid wide enough that every config's curve spans the band
        const double q_lo = fit_step(img, ModePolicy::SdpcAll4, kSubrate, 0.62);
        const double q_hi = fit_step(img, ModePolicy::NoPrediction, kSubrate, 0.24);

        std::vector<RdConfig> configs;
        for (const char* label : {kLabelSq, kLabelDpcm, kLabelSdpc})
            for (int i = 0; i < kGridPoints; ++i) {
                const double t = static_cast<double>(i) / (kGridPoints - 1);
                const double q = q_lo * std::pow(q_hi / q_lo, t);
                configs.push_back(RdConfig{label, policy_for_label(label), q, kSubrate,
                                           ScanOrder::Raster});
            }
        const auto points = rd_sweep(img, name, configs, 1, 16, nullptr, 2);

        std::map<std::string, std::vector<RdPoint>> curves;
        for (const auto& p : points) curves[p.label].push_back(p);

        double avg_sq = 0.0, avg_dpcm = 0.0, avg_sdpc = 0.0;
        for (const double bpp : band) {
            const double psnr_sq = interpolate_psnr_at_bpp(curves[kLabelSq], bpp);
            const double psnr_dpcm = interpolate_psnr_at_bpp(curves[kLabelDpcm], bpp);
            const double psnr_sdpc = interpolate_psnr_at_bpp(curves[kLabelSdpc], bpp);
            if (std::isnan(psnr_sq) || std::isnan(psnr_dpcm) || std::isnan(psnr_sdpc)) {
                ok = false;
                msg << name << " curve does not cover " << bpp << " bpp; ";
                continue;
            }
            avg_sq += psnr_sq;
            avg_dpcm += psnr_dpcm;
            avg_sdpc += psnr_sdpc;
            gain_sum += psnr_sdpc - psnr_dpcm;
            ++gain_count;
        }
        avg_sq /= band.size();
        avg_dpcm /= band.size();
        avg_sdpc /= band.size();
        msg << name << " band-avg SQ " << avg_sq << " / DPCM " << avg_dpcm << " / SDPC "
            << avg_sdpc << "; ";
        if (!(avg_sdpc >= avg_dpcm && avg_dpcm >= avg_sq)) ok = false;
    }

    const double mean_gain = gain_count > 0 ? gain_sum / gain_count : 0.0;
    msg << "mean SDPC-DPCM gain " << mean_gain << " dB";
    detail = msg.str();
    return ok && mean_gain >= 0.3;
}

bool criterion_dpcm_equivalence(std::string& detail) {
    int cases = 0;
    for (const double step : {1.0, 8.0, 32.0}) {
        for (std::uint32_t seed = 1; seed <= 3; ++seed) {
            // one block column: 16 pixels wide, 16 blocks tall
            const Image img = seed % 2 ? test::textured_image(16, 256, seed)
                                       : test::random_image(16, 256, seed);
            CodecConfig vertical_only;
            vertical_only.mode_policy = ModePolicy::SdpcAll4;
            vertical_only.allowed_modes = {true, false, false, false};
            vertical_only.block_size = 16;
            vertical_only.subrate = 0.5;
            vertical_only.step = step;
            vertical_only.scan_order = ScanOrder::ColumnMajor;
            vertical_only.seed = seed;

            CodecConfig dpcm = vertical_only;
            dpcm.mode_policy = ModePolicy::DpcmPreviousBlock;
            dpcm.allowed_modes = {true, true, true, true};

            const EncodeOutput a = encode(img, vertical_only);
            const EncodeOutput b = encode(img, dpcm);

            // strip the mode flags so both index payloads serialize under the
            // same framing, then compare the bytes
            EncodedStream stripped = a.stream;
            stripped.header.mode_policy = ModePolicy::DpcmPreviousBlock;
            for (auto& blk : stripped.blocks) blk.mode.reset();
            ++cases;
            if (write_stream(stripped) != write_stream(b.stream)) {
                detail = "index payload differs (q=" + std::to_string(step) + ")";
                return false;
            }
            if (a.grid.reconstructed != b.grid.reconstructed) {
                detail = "reconstructed measurements differ";
                return false;
            }
        }
    }
    detail = std::to_string(cases) + " single-column streams byte-identical";
    return true;
}

bool criterion_quantizer_oracle(std::string& detail) {
    // dense grid across several cells, several steps
    for (const double step : {0.25, 1.0, 7.5, 32.0}) {
        const Quantizer q{step};
        Eigen::VectorXd d(1);
        for (double v = -2.0 * step; v <= 2.0 * step; v += step / 500.0) {
            d[0] = v;
            const auto s = quantize(q, d);
            if (std::abs(v - step * static_cast<double>(s[0])) > step / 2 + 1e-12) {
                detail = "grid bound violated at v=" + std::to_string(v);
                return false;
            }
        }
    }
    // one million random residuals
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> value(-1e4, 1e4);
    std::uniform_real_distribution<double> step_pick(0.01, 64.0);
    Eigen::VectorXd d(1);
    for (int i = 0; i < 1'000'000; ++i) {
        const double step = step_pick(rng);
        d[0] = value(rng);
        const auto s = quantize(Quantizer{step}, d);
        if (std::abs(d[0] - step * static_cast<double>(s[0])) > step / 2 + 1e-12) {
            detail = "random bound violated";
            return false;
        }
    }
    // entropy estimator against an independent histogram accumulation
    std::uniform_int_distribution<std::int64_t> idx(-40, 40);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::int64_t> indices(4096);
        for (auto& v : indices) v = idx(rng);
        const RateEstimate est = estimate_rate(indices, 16, 128, 262144, trial % 2 == 0);
        std::map<std::int64_t, long double> hist;
        for (const auto v : indices) hist[v] += 1.0L;
        long double h = 0.0L;
        for (const auto& [val, count] : hist) {
            const long double p = count / 4096.0L;
            h -= p * std::log2(p);
        }
        if (std::abs(est.entropy_bits_per_index - static_cast<double>(h)) > 1e-12) {
            detail = "entropy estimator deviates from oracle";
            return false;
        }
    }
    detail = "midtread bound and entropy oracle hold (10^6 random + dense grid)";
    return true;
}

bool criterion_near_lossless(std::string& detail) {
    std::ostringstream msg;
    bool ok = true;
    for (const auto& name : kTestImages) {
        const Image img = load_test_image(name);
        CodecConfig cfg;
        cfg.block_size = 16;
        cfg.subrate = 1.0;
        cfg.step = 0.25;
        cfg.seed = 1;
        const EncodeOutput enc = encode(img, cfg);
        const auto bytes = write_stream(enc.stream);
        const MeasurementGrid grid = decode_measurements(read_stream(bytes));
        const SensingMatrix matrix = generate_matrix(16, 1.0, 1);
        const RecoveryResult res =
            recover(grid, matrix, RecoveryConfig::defaults_for_step(0.25));
        const double db = psnr(res.image, img);
        msg << name << " " << db << " dB; ";
        if (!(db >= 40.0)) ok = false;
    }
    detail = msg.str();
    return ok;
}

bool criterion_overhead(std::string& detail) {
    const std::vector<std::int64_t> indices(256, 0);
    const RateEstimate est = estimate_rate(indices, 16, 128, 262144, true);
    detail = "mode_overhead_bpp = " + std::to_string(est.mode_overhead_bpp);
    if (est.mode_overhead_bpp != 0.0078125) return false;
    const RateEstimate off = estimate_rate(indices, 16, 128, 262144, false);
    return off.mode_overhead_bpp == 0.0;
}

bool criterion_argmin_dominance(std::string& detail) {
    std::size_t compared = 0;
    for (const auto& name : kTestImages) {
        const Image img = load_test_image(name);
        for (const ScanOrder order : {ScanOrder::Raster, ScanOrder::ColumnMajor}) {
            CodecConfig cfg;
            cfg.block_size = 16;
            cfg.subrate = 0.5;
            cfg.step = 16.0;
            cfg.scan_order = order;
            const EncodeOutput enc = encode(img, cfg);
            for (std::size_t i = 0; i < enc.report.residual_l1.size(); ++i) {
                const double prev = enc.report.previous_block_l1[i];
                if (std::isnan(prev)) continue;
                ++compared;
                if (enc.report.residual_l1[i] > prev) {
                    detail = "selected residual exceeds previous-block residual at block " +
                             std::to_string(i);
                    return false;
                }
            }
        }
    }
    detail = std::to_string(compared) + " blocks dominated";
    return compared > 0;
}

struct Criterion {
    const char* name;
    std::function<bool(std::string&)> run;
};

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_data_dir = argv[1];

    const std::vector<Criterion> criteria{
        {"1 closed-loop exactness", criterion_closed_loop},
        {"2 correlation study direction", criterion_correlation},
        {"3 mode statistics sanity", criterion_mode_statistics},
        {"4 rd ordering", criterion_rd_ordering},
        {"5 dpcm equivalence", criterion_dpcm_equivalence},
        {"6 quantizer oracle", criterion_quantizer_oracle},
        {"7 orthogonal near-lossless path", criterion_near_lossless},
        {"8 overhead accounting", criterion_overhead},
        {"9 argmin dominance", criterion_argmin_dominance},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %-32s (%6.1fs)  %s\n", ok ? "PASS" : "FAIL", c.name, secs,
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
