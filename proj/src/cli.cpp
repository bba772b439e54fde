#include "sdpc/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "sdpc/analysis.hpp"
#include "sdpc/bitstream.hpp"
#include "sdpc/codec.hpp"
#include "sdpc/image.hpp"
#include "sdpc/recovery.hpp"

namespace sdpc::cli {

namespace {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

// "WxH", e.g. "512x512".
std::pair<int, int> parse_dims(const std::string& spec) {
    const auto x = spec.find('x');
    if (x == std::string::npos || x == 0 || x + 1 >= spec.size())
        throw std::invalid_argument("raw dimensions must look like 512x512");
    const int w = std::stoi(spec.substr(0, x));
    const int h = std::stoi(spec.substr(x + 1));
    if (w <= 0 || h <= 0) throw std::invalid_argument("raw dimensions must be positive");
    return {w, h};
}

Image load_input_image(const std::string& path, const std::string& raw_spec) {
    if (!raw_spec.empty()) {
        const auto [w, h] = parse_dims(raw_spec);
        return load_raw(read_file_bytes(path), w, h);
    }
    return load_pgm_file(path);
}

// Write via a temporary in the same directory, then rename, so failed runs
// never leave partial output files.
class AtomicFileWriter {
public:
    explicit AtomicFileWriter(const std::string& path)
        : final_path_(path), temp_path_(path + ".tmp") {}
    ~AtomicFileWriter() {
        if (!committed_) {
            std::error_code ec;
            fs::remove(temp_path_, ec);
        }
    }
    void write_bytes(const std::vector<std::uint8_t>& bytes) {
        std::ofstream out(temp_path_, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + temp_path_ + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + temp_path_);
    }
    void write_text(const std::string& text) {
        std::ofstream out(temp_path_, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + temp_path_ + " for writing");
        out << text;
        if (!out) throw std::runtime_error("write failed: " + temp_path_);
    }
    void commit() {
        fs::rename(temp_path_, final_path_);
        committed_ = true;
    }

private:
    std::string final_path_;
    std::string temp_path_;
    bool committed_ = false;
};

ScanOrder parse_scan(const std::string& name) {
    if (name == "raster") return ScanOrder::Raster;
    if (name == "column") return ScanOrder::ColumnMajor;
    throw std::invalid_argument("scan must be raster or column");
}

ModePolicy parse_policy(const std::string& name) {
    if (name == "sdpc") return ModePolicy::SdpcAll4;
    if (name == "dpcm") return ModePolicy::DpcmPreviousBlock;
    if (name == "none") return ModePolicy::NoPrediction;
    throw std::invalid_argument("policy must be sdpc, dpcm or none");
}

struct RecoveryFlags {
    int max_iters = -1;
    double stop_tol = -1.0;
    double tau0 = -1.0;
    double rho_tau = -1.0;
    int window = -1;

    void add_to(CLI::App& app) {
        app.add_option("--max-iters", max_iters, "recovery iteration cap");
        app.add_option("--stop-tol", stop_tol, "relative-change stop tolerance");
        app.add_option("--tau0", tau0, "initial DCT threshold (default 2q+8)");
        app.add_option("--rho-tau", rho_tau, "threshold decay factor in (0,1)");
        app.add_option("--window", window, "Wiener window (odd, >= 3)");
    }
    RecoveryConfig resolve(double step) const {
        RecoveryConfig cfg = RecoveryConfig::defaults_for_step(step);
        if (max_iters > 0) cfg.max_iters = max_iters;
        if (stop_tol >= 0.0) cfg.stop_tol = stop_tol;
        if (tau0 > 0.0) cfg.initial_threshold = tau0;
        if (rho_tau > 0.0) cfg.threshold_decay = rho_tau;
        if (window > 0) cfg.smoothing_window = window;
        return cfg;
    }
};

double encode_only_bpp(const Image& img, ModePolicy policy, ScanOrder scan,
                       int block_size, double subrate, double step, std::uint64_t seed) {
    CodecConfig cfg;
    cfg.mode_policy = policy;
    cfg.block_size = block_size;
    cfg.subrate = subrate;
    cfg.step = step;
    cfg.seed = seed;
    cfg.scan_order = scan;
    const EncodeOutput enc = encode(img, cfg);
    const auto indices = pooled_indices(enc.stream);
    return estimate_rate(indices, block_size,
                         static_cast<int>(enc.stream.header.measurement_count),
                         img.pixel_count(), enc.stream.header.signals_modes())
        .total_bpp;
}

// Smallest/largest step whose bpp crosses `target`, by bisection on log q
// (bpp is non-increasing in q).
double fit_step_for_bpp(const Image& img, ModePolicy policy, ScanOrder scan,
                        int block_size, double subrate, std::uint64_t seed,
                        double target_bpp) {
    double lo = 1e-2, hi = 1e6;
    for (int iter = 0; iter < 40; ++iter) {
        const double mid = std::sqrt(lo * hi);
        const double bpp = encode_only_bpp(img, policy, scan, block_size, subrate, mid, seed);
        if (bpp > target_bpp)
            lo = mid;
        else
            hi = mid;
        if (hi / lo < 1.02) break;
    }
    return std::sqrt(lo * hi);
}

std::string format_double(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

int cmd_encode(const std::string& input, const std::string& output,
               const std::string& raw_spec, const CodecConfig& cfg, std::ostream& out) {
    const Image img = load_input_image(input, raw_spec);
    const EncodeOutput enc = encode(img, cfg);
    const auto indices = pooled_indices(enc.stream);
    const RateEstimate est = estimate_rate(
        indices, cfg.block_size, static_cast<int>(enc.stream.header.measurement_count),
        img.pixel_count(), enc.stream.header.signals_modes());

    const auto bytes = write_stream(enc.stream);
    AtomicFileWriter writer(output);
    writer.write_bytes(bytes);
    writer.commit();

    const double actual_bpp =
        static_cast<double>(bytes.size()) * 8.0 / static_cast<double>(img.pixel_count());
    out << "wrote " << output << " (" << bytes.size() << " bytes)\n";
    out << "estimated bpp: " << format_double(est.total_bpp)
        << " (without mode flags: " << format_double(est.total_bpp_no_modes) << ")\n";
    out << "actual bpp: " << format_double(actual_bpp) << "\n";
    return 0;
}

int cmd_decode(const std::string& input, const std::string& output,
               const std::string& reference, const RecoveryFlags& rflags,
               std::ostream& out) {
    const EncodedStream stream = read_stream_file(input);
    const MeasurementGrid grid = decode_measurements(stream);
    const SensingMatrix matrix = generate_matrix_mb(
        stream.header.block_size, static_cast<int>(stream.header.measurement_count),
        stream.header.seed);

    const RecoveryConfig rcfg = rflags.resolve(stream.header.step);
    const RecoveryResult res = recover(grid, matrix, rcfg);

    const auto bytes = store_pgm(res.image);
    AtomicFileWriter writer(output);
    writer.write_bytes(bytes);
    writer.commit();

    out << "recovered " << res.image.width << "x" << res.image.height << " image in "
        << res.iterations << " iterations ("
        << (res.converged ? "converged" : "stopped at max-iters") << ")\n";
    out << "wrote " << output << "\n";

    if (!reference.empty()) {
        const Image ref = load_pgm_file(reference);
        const double db = psnr(res.image, ref);
        out << "psnr: " << (std::isinf(db) ? std::string("inf") : format_double(db, 4))
            << " dB\n";
    }
    return 0;
}

int cmd_analyze(const std::string& input, const std::string& raw_spec, int block_size,
                double subrate, std::uint64_t seed, const std::string& csv_path,
                std::ostream& out) {
    const Image img = load_input_image(input, raw_spec);
    const std::string name = fs::path(input).stem().string();

    std::ostringstream csv;
    csv << "image,scan,blocks,acc1,acc2,excluded_prev,excluded_pred,"
           "pct_vertical,pct_horizontal,pct_dc,pct_diagonal\n";

    for (const ScanOrder order : {ScanOrder::Raster, ScanOrder::ColumnMajor}) {
        const CorrelationReport rep = acc_study(img, block_size, subrate, seed, order);
        const double pct_sum =
            rep.mode_percent[0] + rep.mode_percent[1] + rep.mode_percent[2] + rep.mode_percent[3];

        out << "scan=" << scan_order_name(order) << "  blocks=" << rep.cc_previous.size()
            << "  excluded: prev=" << rep.excluded_previous
            << " pred=" << rep.excluded_prediction << "\n";
        out << "  ACC1 (previous block): " << format_double(rep.acc_previous, 4) << "\n";
        out << "  ACC2 (SDPC selection): " << format_double(rep.acc_prediction, 4) << "\n";
        out << "  mode usage:";
        for (int m = 0; m < 4; ++m)
            out << "  " << prediction_mode_name(static_cast<PredictionMode>(m)) << " "
                << format_double(rep.mode_percent[static_cast<std::size_t>(m)], 2) << "%";
        out << "  (sum " << format_double(pct_sum, 2) << "%)\n";

        csv << name << ',' << scan_order_name(order) << ',' << rep.cc_previous.size() << ','
            << format_double(rep.acc_previous, 6) << ',' << format_double(rep.acc_prediction, 6)
            << ',' << rep.excluded_previous << ',' << rep.excluded_prediction;
        for (int m = 0; m < 4; ++m)
            csv << ',' << format_double(rep.mode_percent[static_cast<std::size_t>(m)], 4);
        csv << '\n';
    }

    if (!csv_path.empty()) {
        AtomicFileWriter writer(csv_path);
        writer.write_text(csv.str());
        writer.commit();
        out << "wrote " << csv_path << "\n";
    }
    return 0;
}

int cmd_bench(const std::vector<std::string>& inputs, const std::string& raw_spec,
              int block_size, double subrate, const std::vector<std::uint64_t>& seeds,
              int points, const std::string& scan_choice, double bpp_min, double bpp_max,
              int threads, const RecoveryFlags& rflags, const std::string& csv_path,
              std::ostream& out, std::ostream& err) {
    std::vector<ScanOrder> scans;
    if (scan_choice == "both")
        scans = {ScanOrder::Raster, ScanOrder::ColumnMajor};
    else
        scans = {parse_scan(scan_choice)};

    const bool have_override = rflags.max_iters > 0 || rflags.stop_tol >= 0.0 ||
                               rflags.tau0 > 0.0 || rflags.rho_tau > 0.0 || rflags.window > 0;

    std::vector<RdPoint> all_points;
    for (const std::string& input : inputs) {
        const Image img = load_input_image(input, raw_spec);
        const std::string name = fs::path(input).stem().string();

        // One q grid per image, shared by all three configs: wide enough that
        // the lightest predictor reaches bpp_max and the heaviest payload
        // still drops to bpp_min.
        const double q_lo = fit_step_for_bpp(img, ModePolicy::SdpcAll4, scans.front(),
                                             block_size, subrate, seeds.front(), bpp_max);
        const double q_hi = fit_step_for_bpp(img, ModePolicy::NoPrediction, scans.front(),
                                             block_size, subrate, seeds.front(), bpp_min);
        const double lo = std::min(q_lo, q_hi);
        const double hi = std::max(q_lo, q_hi);

        std::vector<double> grid(static_cast<std::size_t>(points));
        for (int i = 0; i < points; ++i) {
            const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
            grid[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, t);
        }

        std::vector<RdConfig> configs;
        for (const ScanOrder scan : scans)
            for (const char* label : {kLabelSq, kLabelDpcm, kLabelSdpc})
                for (const double q : grid)
                    configs.push_back(RdConfig{label, policy_for_label(label), q, subrate, scan});

        for (const std::uint64_t seed : seeds) {
            err << "bench: " << name << " seed " << seed << " (" << configs.size()
                << " points)\n";
            RecoveryConfig override_cfg;
            const RecoveryConfig* override_ptr = nullptr;
            if (have_override) {
                override_cfg = rflags.resolve(grid.front());
                override_ptr = &override_cfg;
            }
            const auto pts =
                rd_sweep(img, name, configs, seed, block_size, override_ptr, threads);
            all_points.insert(all_points.end(), pts.begin(), pts.end());
        }
    }

    std::ostringstream csv;
    write_rd_csv(csv, all_points);
    if (csv_path.empty()) {
        out << csv.str();
    } else {
        AtomicFileWriter writer(csv_path);
        writer.write_text(csv.str());
        writer.commit();
        out << "wrote " << csv_path << " (" << all_points.size() << " rows)\n";
    }
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quantized block-based compressive sensing codec with directional "
                 "prediction of measurements"};
    app.require_subcommand(1);

    // encode
    auto* enc = app.add_subcommand("encode", "compress an image into a .sdpc stream");
    std::string enc_in, enc_out, enc_raw, enc_policy = "sdpc", enc_scan = "raster";
    CodecConfig enc_cfg;
    enc->add_option("input", enc_in, "input image (PGM, or raw with --raw)")->required();
    enc->add_option("output", enc_out, "output .sdpc path")->required();
    enc->add_option("--q", enc_cfg.step, "quantizer step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    enc->add_option("--block-size,-B", enc_cfg.block_size, "block size B")
        ->check(CLI::Range(2, 4096))
        ->capture_default_str();
    enc->add_option("--subrate,-S", enc_cfg.subrate, "measurement subrate in (0,1]")
        ->check(CLI::Range(std::numeric_limits<double>::min(), 1.0))
        ->capture_default_str();
    enc->add_option("--seed", enc_cfg.seed, "sensing matrix seed")->capture_default_str();
    enc->add_option("--policy", enc_policy, "prediction policy: sdpc|dpcm|none")
        ->check(CLI::IsMember({"sdpc", "dpcm", "none"}))
        ->capture_default_str();
    enc->add_option("--scan", enc_scan, "block scan order: raster|column")
        ->check(CLI::IsMember({"raster", "column"}))
        ->capture_default_str();
    enc->add_option("--raw", enc_raw, "treat input as raw 8-bit data with dimensions WxH");

    // decode
    auto* dec = app.add_subcommand("decode", "reconstruct an image from a .sdpc stream");
    std::string dec_in, dec_out, dec_ref;
    RecoveryFlags dec_rflags;
    dec->add_option("input", dec_in, "input .sdpc path")->required();
    dec->add_option("output", dec_out, "output PGM path")->required();
    dec->add_option("--reference", dec_ref, "original image for PSNR reporting");
    dec_rflags.add_to(*dec);

    // analyze
    auto* ana = app.add_subcommand("analyze", "measurement-domain correlation and mode usage");
    std::string ana_in, ana_raw, ana_csv;
    int ana_block = 16;
    double ana_subrate = 0.5;
    std::uint64_t ana_seed = 1;
    ana->add_option("input", ana_in, "input image")->required();
    ana->add_option("--block-size,-B", ana_block, "block size B")
        ->check(CLI::Range(2, 4096))
        ->capture_default_str();
    ana->add_option("--subrate,-S", ana_subrate, "measurement subrate in (0,1]")
        ->check(CLI::Range(std::numeric_limits<double>::min(), 1.0))
        ->capture_default_str();
    ana->add_option("--seed", ana_seed, "sensing matrix seed")->capture_default_str();
    ana->add_option("--csv", ana_csv, "write machine-readable results to this path");
    ana->add_option("--raw", ana_raw, "treat input as raw 8-bit data with dimensions WxH");

    // bench
    auto* ben = app.add_subcommand("bench", "rate-distortion sweep over SQ, DPCM+SQ, SDPC+SQ");
    std::vector<std::string> ben_in;
    std::string ben_raw, ben_csv, ben_scan = "both";
    int ben_block = 16, ben_points = 8, ben_threads = 0;
    double ben_subrate = 0.5, ben_bpp_min = 0.1, ben_bpp_max = 1.0;
    std::vector<std::uint64_t> ben_seeds{1};
    RecoveryFlags ben_rflags;
    ben->add_option("inputs", ben_in, "input images")->required();
    ben->add_option("--csv", ben_csv, "CSV output path (default: stdout)");
    ben->add_option("--seeds", ben_seeds, "comma-separated seeds")
        ->delimiter(',')
        ->capture_default_str();
    ben->add_option("--block-size,-B", ben_block, "block size B")
        ->check(CLI::Range(2, 4096))
        ->capture_default_str();
    ben->add_option("--subrate,-S", ben_subrate, "measurement subrate in (0,1]")
        ->check(CLI::Range(std::numeric_limits<double>::min(), 1.0))
        ->capture_default_str();
    ben->add_option("--points", ben_points, "q grid size per config")
        ->check(CLI::Range(1, 256))
        ->capture_default_str();
    ben->add_option("--scan", ben_scan, "scan order(s): raster|column|both")
        ->check(CLI::IsMember({"raster", "column", "both"}))
        ->capture_default_str();
    ben->add_option("--bpp-min", ben_bpp_min, "low end of the target bpp span")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ben->add_option("--bpp-max", ben_bpp_max, "high end of the target bpp span")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ben->add_option("--threads", ben_threads, "worker threads (0 = auto)")
        ->check(CLI::Range(0, 1024));
    ben->add_option("--raw", ben_raw, "treat inputs as raw 8-bit data with dimensions WxH");
    ben_rflags.add_to(*ben);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (enc->parsed()) {
            enc_cfg.mode_policy = parse_policy(enc_policy);
            enc_cfg.scan_order = parse_scan(enc_scan);
            return cmd_encode(enc_in, enc_out, enc_raw, enc_cfg, out);
        }
        if (dec->parsed()) return cmd_decode(dec_in, dec_out, dec_ref, dec_rflags, out);
        if (ana->parsed())
            return cmd_analyze(ana_in, ana_raw, ana_block, ana_subrate, ana_seed, ana_csv, out);
        if (ben->parsed()) {
            if (ben_bpp_min >= ben_bpp_max) {
                err << "error: --bpp-min must be below --bpp-max\n";
                return 1;
            }
            const int threads = ben_threads > 0
                                    ? ben_threads
                                    : std::max(1u, std::thread::hardware_concurrency());
            return cmd_bench(ben_in, ben_raw, ben_block, ben_subrate, ben_seeds, ben_points,
                             ben_scan, ben_bpp_min, ben_bpp_max, threads, ben_rflags, ben_csv,
                             out, err);
        }
        err << "error: no subcommand\n";
        return 1;
    } catch (const PgmParseError& e) {
        err << "format error: " << e.what() << "\n";
        return 2;
    } catch (const StreamFormatError& e) {
        err << "format error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        err << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace sdpc::cli
