#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "sdpc/bitstream.hpp"

using namespace sdpc;

namespace {

std::vector<bool> bits_of(const std::vector<std::uint8_t>& bytes, std::size_t count) {
    std::vector<bool> bits;
    for (std::size_t i = 0; i < count; ++i)
        bits.push_back((bytes[i / 8] >> (7 - i % 8)) & 1);
    return bits;
}

std::vector<bool> golomb_bits(std::int64_t value) {
    BitWriter w;
    put_signed_exp_golomb(w, value);
    const std::size_t n = w.bit_count();
    return bits_of(w.finish(), n);
}

StreamHeader small_header(int blocks_x, int blocks_y, int block_size, int m,
                          ModePolicy policy, ScanOrder order = ScanOrder::Raster) {
    StreamHeader h;
    h.width = static_cast<std::uint32_t>(blocks_x * block_size);
    h.height = static_cast<std::uint32_t>(blocks_y * block_size);
    h.block_size = static_cast<std::uint16_t>(block_size);
    h.measurement_count = static_cast<std::uint32_t>(m);
    h.scan_order = order;
    h.mode_policy = policy;
    h.step = 8.0;
    h.seed = 1;
    return h;
}

EncodedStream random_stream(std::mt19937& rng) {
    std::uniform_int_distribution<int> small(1, 4);
    std::uniform_int_distribution<int> policy_pick(0, 2);
    const int bx = small(rng);
    const int by = small(rng);
    const int block_size = 2 * small(rng);
    std::uniform_int_distribution<int> mpick(1, block_size * block_size);
    const int m = mpick(rng);
    const auto policy = static_cast<ModePolicy>(policy_pick(rng));

    EncodedStream s;
    s.header = small_header(bx, by, block_size, m, policy,
                            (rng() & 1) ? ScanOrder::Raster : ScanOrder::ColumnMajor);

    std::uniform_int_distribution<std::int64_t> wide(-(1LL << 30), (1LL << 30));
    std::uniform_int_distribution<std::int64_t> narrow(-4, 4);
    std::uniform_int_distribution<int> mode_pick(0, 3);
    for (int i = 0; i < bx * by; ++i) {
        BlockPayload b;
        if (s.header.signals_modes())
            b.mode = static_cast<PredictionMode>(mode_pick(rng));
        for (int k = 0; k < m; ++k)
            b.indices.push_back((rng() % 8 == 0) ? wide(rng) : narrow(rng));
        s.blocks.push_back(std::move(b));
    }
    return s;
}

bool streams_equal(const EncodedStream& a, const EncodedStream& b) {
    if (a.blocks.size() != b.blocks.size()) return false;
    for (std::size_t i = 0; i < a.blocks.size(); ++i) {
        if (a.blocks[i].mode != b.blocks[i].mode) return false;
        if (a.blocks[i].indices != b.blocks[i].indices) return false;
    }
    return a.header.width == b.header.width && a.header.height == b.header.height &&
           a.header.block_size == b.header.block_size &&
           a.header.measurement_count == b.header.measurement_count &&
           a.header.scan_order == b.header.scan_order &&
           a.header.mode_policy == b.header.mode_policy && a.header.step == b.header.step &&
           a.header.seed == b.header.seed;
}

} // namespace

TEST_CASE("signed Exp-Golomb atoms match the expected codewords") {
    CHECK(golomb_bits(0) == std::vector<bool>{1});
    CHECK(golomb_bits(1) == std::vector<bool>{0, 1, 0});
    CHECK(golomb_bits(-1) == std::vector<bool>{0, 1, 1});
    CHECK(golomb_bits(2) == std::vector<bool>{0, 0, 1, 0, 0});
    CHECK(golomb_bits(-2) == std::vector<bool>{0, 0, 1, 0, 1});
}

TEST_CASE("signed Exp-Golomb round-trips individual values") {
    std::vector<std::int64_t> values{0, 1, -1, 2, -2, 17, -100, 12345, -(1LL << 30),
                                     (1LL << 31) - 1, -((1LL << 31) - 1)};
    BitWriter w;
    for (const auto v : values) put_signed_exp_golomb(w, v);
    const auto bytes = w.finish();
    BitReader r(bytes);
    for (const auto v : values) CHECK(get_signed_exp_golomb(r) == v);
}

TEST_CASE("index magnitude cap is enforced") {
    BitWriter w;
    CHECK_THROWS_AS(put_signed_exp_golomb(w, std::int64_t{1} << 31), StreamFormatError);
    CHECK_THROWS_AS(put_signed_exp_golomb(w, -(std::int64_t{1} << 31)), StreamFormatError);
}

TEST_CASE("write/read round-trips randomized streams") {
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 10000; ++trial) {
        const EncodedStream s = random_stream(rng);
        const auto bytes = write_stream(s);
        const EncodedStream back = read_stream(bytes);
        REQUIRE(streams_equal(s, back));
    }
}

TEST_CASE("serialization is deterministic") {
    std::mt19937 rng(7);
    const EncodedStream s = random_stream(rng);
    CHECK(write_stream(s) == write_stream(s));
}

TEST_CASE("read_stream rejects malformed inputs with distinct codes") {
    std::mt19937 rng(5);
    const EncodedStream s = random_stream(rng);
    const auto bytes = write_stream(s);

    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'X';
        try {
            read_stream(bad);
            FAIL("expected throw");
        } catch (const StreamFormatError& e) {
            CHECK(e.code() == StreamError::BadMagic);
        }
    }
    SUBCASE("version flip") {
        auto bad = bytes;
        bad[4] = 0x7f;
        try {
            read_stream(bad);
            FAIL("expected throw");
        } catch (const StreamFormatError& e) {
            CHECK(e.code() == StreamError::VersionMismatch);
        }
    }
    SUBCASE("generator version flip") {
        auto bad = bytes;
        bad[6] = 0x7f;
        try {
            read_stream(bad);
            FAIL("expected throw");
        } catch (const StreamFormatError& e) {
            CHECK(e.code() == StreamError::GeneratorVersionMismatch);
        }
    }
    SUBCASE("cut at half length reports the failing block") {
        auto bad = bytes;
        bad.resize(kHeaderSize + (bad.size() - kHeaderSize) / 2);
        try {
            read_stream(bad);
            FAIL("expected throw");
        } catch (const StreamFormatError& e) {
            CHECK(e.code() == StreamError::Truncated);
            CHECK(e.block_index() >= 0);
            CHECK(e.block_index() < static_cast<std::ptrdiff_t>(s.blocks.size()));
        }
    }
    SUBCASE("trailing bytes rejected") {
        auto bad = bytes;
        bad.push_back(0x00);
        bad.push_back(0xff);
        try {
            read_stream(bad);
            FAIL("expected throw");
        } catch (const StreamFormatError& e) {
            CHECK(e.code() == StreamError::TrailingGarbage);
        }
    }
}

TEST_CASE("nonzero padding bits are trailing garbage") {
    EncodedStream s;
    s.header = small_header(1, 1, 2, 1, ModePolicy::NoPrediction);
    s.blocks.push_back(BlockPayload{std::nullopt, {0}});
    auto bytes = write_stream(s);
    // payload is the single bit "1" then 7 pad zeros
    REQUIRE(bytes.size() == kHeaderSize + 1);
    CHECK(read_stream(bytes).blocks.size() == 1);
    bytes.back() |= 0x01;
    try {
        read_stream(bytes);
        FAIL("expected throw");
    } catch (const StreamFormatError& e) {
        CHECK(e.code() == StreamError::TrailingGarbage);
    }
}

TEST_CASE("write_stream validates counts and policy consistency") {
    EncodedStream s;
    s.header = small_header(2, 1, 2, 2, ModePolicy::NoPrediction);
    s.blocks.push_back(BlockPayload{std::nullopt, {0, 1}});
    CHECK_THROWS_AS(write_stream(s), std::invalid_argument); // one block missing

    s.blocks.push_back(BlockPayload{std::nullopt, {0}});
    CHECK_THROWS_AS(write_stream(s), std::invalid_argument); // short index vector

    s.blocks.back().indices = {0, 2};
    CHECK(write_stream(s).size() > kHeaderSize);

    s.blocks.back().mode = PredictionMode::DC; // flag under a no-flag policy
    CHECK_THROWS_AS(write_stream(s), std::invalid_argument);
}

TEST_CASE("estimate_rate matches a brute-force entropy oracle") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<std::int64_t> dist(-20, 20);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::int64_t> indices(1024);
        for (auto& v : indices) v = dist(rng);

        const RateEstimate est = estimate_rate(indices, 16, 128, 512 * 512, true);

        std::map<std::int64_t, long double> hist;
        for (const auto v : indices) hist[v] += 1.0L;
        long double h = 0.0L;
        for (const auto& [value, count] : hist) {
            const long double p = count / 1024.0L;
            h -= p * std::log2(p);
        }
        CHECK(std::abs(est.entropy_bits_per_index - static_cast<double>(h)) <= 1e-12);
        CHECK(est.index_bits == doctest::Approx(static_cast<double>(h) * 1024.0).epsilon(1e-12));
    }
}

TEST_CASE("estimate_rate degenerate and exact cases") {
    SUBCASE("all identical indices cost only the mode overhead") {
        std::vector<std::int64_t> indices(256, 3);
        const RateEstimate est = estimate_rate(indices, 16, 128, 1024, true);
        CHECK(est.entropy_bits_per_index == 0.0);
        CHECK(est.index_bits == 0.0);
        CHECK(est.total_bpp == doctest::Approx(2.0 * 2.0 / 1024.0)); // 2 blocks
        CHECK(est.total_bpp_no_modes == 0.0);
    }
    SUBCASE("uniform over 4 values is 2 bits per index") {
        std::vector<std::int64_t> indices;
        for (int i = 0; i < 64; ++i) indices.push_back(i % 4);
        const RateEstimate est = estimate_rate(indices, 16, 64, 4096, false);
        CHECK(est.entropy_bits_per_index == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(est.mode_overhead_bpp == 0.0);
    }
    SUBCASE("mode overhead for B=16 is exactly 2/256") {
        std::vector<std::int64_t> indices(128, 0);
        const RateEstimate est = estimate_rate(indices, 16, 128, 262144, true);
        CHECK(est.mode_overhead_bpp == 0.0078125);
    }
    SUBCASE("empty input is an error") {
        CHECK_THROWS_AS(estimate_rate({}, 16, 128, 1024, false), std::invalid_argument);
    }
}

TEST_CASE("serialized payload never undercuts the entropy estimate") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const EncodedStream s = random_stream(rng);
        const auto indices = pooled_indices(s);
        const auto est = estimate_rate(
            indices, s.header.block_size, static_cast<int>(s.header.measurement_count),
            static_cast<std::int64_t>(s.header.width) * s.header.height,
            s.header.signals_modes());
        const auto bytes = write_stream(s);
        CHECK(static_cast<double>(bytes.size()) * 8.0 >= est.index_bits);
    }
}
