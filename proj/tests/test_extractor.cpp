#include "doctest_main.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cvqrng/error.hpp"
#include "cvqrng/extractor.hpp"
#include "cvqrng/rng.hpp"

using namespace cvqrng;
using namespace cvqrng::extractor;

namespace {

BitVector random_bits(std::size_t n, RngStream& rng) {
    BitVector v(n);
    for (std::size_t i = 0; i < n; ++i) v.set(i, rng() >> 63);
    return v;
}

EntropyCertificate certificate(double h) {
    EntropyCertificate c;
    c.bound = entropy::vacuum_min_entropy(entropy::delta_for_min_entropy(h));
    c.fresh = true;
    return c;
}

}  // namespace

TEST_CASE("plan at the operating point distils 5.4 bits per 8-bit sample") {
    // Exact rational search: N = 1540 is the first block size meeting floor(5.53 N - 200) >= 5.4 N.
    const auto p = plan_extraction(8, 5.53, std::exp2(-100), 5.4);
    CHECK(p.samples_per_block == 1540);
    CHECK(p.output_bits == 8316);
    CHECK(p.input_bits == 12320);
    CHECK(p.seed_bits == 20635);
    CHECK(p.log2_inv_epsilon == 100.0);
    CHECK(p.output_bits_per_sample() >= 5.4 - 1e-12);
    CHECK(p.leftover_hash_slack() >= 0.0);
    // N = 1539 falls short: floor(1539*5.53 - 200) = 8310 < 8310.6.
    CHECK(std::floor(1539 * 5.53 - 200) < 5.4 * 1539);
}

TEST_CASE("plan for a full-entropy source") {
    const auto p = plan_extraction(8, 8.0, std::exp2(-100), 7.9);
    CHECK(p.samples_per_block == 2000);
    CHECK(p.output_bits == 15800);
    CHECK(p.seed_bits == 16000 + 15800 - 1);
}

TEST_CASE("plans obey the leftover-hash bound") {
    auto rng = RngStream::substream(5, "plans", 0);
    for (int k = 0; k < 200; ++k) {
        const double h = 1.0 + 6.9 * rng.uniform();
        const double target = h * (0.5 + 0.49 * rng.uniform());
        const double l = 10 + 120 * rng.uniform();
        const auto p = plan_extraction_log2(8, h, l, target);
        CHECK(static_cast<double>(p.output_bits) + 2 * l <= static_cast<double>(p.samples_per_block) * h);
        CHECK(p.output_bits >= 1);
        CHECK(p.seed_bits == p.input_bits + p.output_bits - 1);
        if (p.samples_per_block > 1) {
            const double prev = static_cast<double>(p.samples_per_block - 1);
            CHECK(std::floor(prev * h - 2 * l) < target * prev * (1 - 1e-12));
        }
    }
}

TEST_CASE("infeasible and invalid plans") {
    CHECK_THROWS_AS(plan_extraction(8, 5.53, std::exp2(-100), 5.53), InfeasiblePlan);
    CHECK_THROWS_AS(plan_extraction(8, 5.53, std::exp2(-100), 6.0), InfeasiblePlan);
    CHECK_THROWS_AS(plan_extraction(8, 5.53, 0.7, 5.0), InvalidInput);
    CHECK_THROWS_AS(plan_extraction(8, 9.0, 1e-30, 5.0), InvalidInput);
}

TEST_CASE("tiny Toeplitz product matches hand evaluation") {
    // T = [[s3 s2 s1 s0], [s4 s3 s2 s1]] = [[1 1 0 1], [0 1 1 0]]; x = 1011.
    const auto seed = BitVector::from_string("10110");
    const auto x = BitVector::from_string("1011");
    CHECK(toeplitz_hash_naive(x, seed, 2).to_string() == "01");
    CHECK(toeplitz_hash(x, seed, 2).to_string() == "01");
}

TEST_CASE("zero input hashes to zero") {
    auto rng = RngStream::substream(1, "zero", 0);
    const auto seed = random_bits(12320 + 8316 - 1, rng);
    const auto out = toeplitz_hash(BitVector(12320), seed, 8316);
    CHECK(out == BitVector(8316));
}

TEST_CASE("Toeplitz hash is GF(2)-linear") {
    auto rng = RngStream::substream(2, "linear", 0);
    const std::size_t n = 12312, m = 8312;
    const auto seed = random_bits(n + m - 1, rng);
    const ToeplitzHasher h(seed, n, m);
    bool all = true;
    for (int k = 0; k < 100; ++k) {
        const auto x = random_bits(n, rng), y = random_bits(n, rng);
        all = all && (h(x ^ y) == (h(x) ^ h(y)));
    }
    CHECK(all);
}

TEST_CASE("accelerated hash equals the naive product on random instances") {
    auto rng = RngStream::substream(3, "oracle", 0);
    int mismatches = 0;
    for (int k = 0; k < 300; ++k) {
        const auto n = static_cast<std::size_t>(std::exp2(14 * rng.uniform())) ;
        const auto m = 1 + static_cast<std::size_t>(rng.uniform() * n);
        const auto seed = random_bits(n + m - 1, rng);
        const auto x = random_bits(n, rng);
        mismatches += toeplitz_hash(x, seed, m) == toeplitz_hash_naive(x, seed, m) ? 0 : 1;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("length mismatches are rejected") {
    const auto seed = BitVector::from_string("10110");
    CHECK_THROWS_AS(toeplitz_hash(BitVector::from_string("101"), seed, 2), InvalidInput);
    CHECK_THROWS_AS(toeplitz_hash_naive(BitVector::from_string("1011"), seed, 3), InvalidInput);
    const ToeplitzHasher h(seed, 4, 2);
    CHECK_THROWS_AS(h(BitVector(5)), InvalidInput);
}

TEST_CASE("samples serialize as two's complement, most significant bit first") {
    const std::vector<std::int16_t> codes{-1, 0, 5, -128, 127};
    CHECK(serialize_samples(codes, 8).to_string() == "1111111100000000000001011000000001111111");
    const std::vector<std::int16_t> four{-8, 7, -3};
    CHECK(serialize_samples(four, 4).to_string() == "100001111101");
    const std::vector<std::int16_t> bad{200};
    CHECK_THROWS_AS(serialize_samples(bad, 8), InvalidInput);
}

TEST_CASE("bit packing round-trips") {
    const auto v = BitVector::from_string("1000000011");
    const auto bytes = v.pack_msb_first();
    REQUIRE(bytes.size() == 2);
    CHECK(bytes[0] == 0x80);
    CHECK(bytes[1] == 0xC0);
    CHECK(BitVector::unpack_msb_first(bytes, 10) == v);
    BitVector a = BitVector::from_string("101");
    a.append(BitVector::from_string("0110"));
    CHECK(a.to_string() == "1010110");
}

TEST_CASE("seed files are validated by length") {
    const auto seed = make_test_seed(20635, 7);
    CHECK_FALSE(seed.secure());
    CHECK(to_string(seed.provenance).find("NOT SECURE") != std::string::npos);
    const auto path = (std::filesystem::temp_directory_path() / "cvqrng_seed_test.bin").string();
    write_seed_file(path, seed);
    CHECK(std::filesystem::file_size(path) == 2580);
    const auto back = read_seed_file(path, 20635);
    CHECK(back.bits == seed.bits);
    CHECK(back.secure());
    CHECK_THROWS_AS(read_seed_file(path, 20000), InvalidInput);
    std::filesystem::remove(path);
}

TEST_CASE("stream extraction at the operating point") {
    const auto plan = plan_extraction(8, 5.53, std::exp2(-100), 5.4);
    const auto seed = make_test_seed(static_cast<std::size_t>(plan.seed_bits), 11);
    detector::MeasurementConfig cfg;
    cfg.conversion_gain = 350;
    const auto raw = detector::measure_stream(states::Vacuum{}, cfg, 10'000 * plan.samples_per_block + 77, 9, 1,
                                              1 << 16, std::thread::hardware_concurrency());
    const std::vector<detector::RawSampleBlock> blocks{raw};
    const auto cert = certificate(5.55);
    const auto res = extract_stream(blocks, plan, seed, cert, std::thread::hardware_concurrency());
    CHECK(res.report.blocks == 10'000);
    CHECK(res.report.raw_samples_discarded == 77);
    CHECK(res.report.output_bits == 10'000 * 8316);
    CHECK(res.report.effective_bits_per_sample() == doctest::Approx(5.4).epsilon(1e-12));
    CHECK(res.report.output_bit_rate() == doctest::Approx(270e6).epsilon(1e-12));
    const auto text = res.report.to_text();
    CHECK(text.find("effective_bits_per_sample: 5.4\n") != std::string::npos);
    CHECK(text.find("seed_provenance: test-prng (NOT SECURE)") != std::string::npos);

    // Block-parallel output is identical to the serial result.
    const std::vector<detector::RawSampleBlock> small{detector::measure_stream(states::Vacuum{}, cfg, 40 * 1540, 9)};
    const auto a = extract_stream(small, plan, seed, cert, 1);
    const auto b = extract_stream(small, plan, seed, cert, 5);
    CHECK(a.output == b.output);
    CHECK(a.report.to_text() == b.report.to_text());
    // First block equals the naive product on the serialized samples.
    const std::span<const std::int16_t> first(small[0].codes.data(), 1540);
    CHECK(toeplitz_hash_naive(serialize_samples(first, 8), seed.bits, 8316).to_string() ==
          a.output.to_string().substr(0, 8316));
}

TEST_CASE("extraction refuses stale or insufficient calibrations") {
    const auto plan = plan_extraction(8, 5.53, std::exp2(-100), 5.4);
    const auto seed = make_test_seed(static_cast<std::size_t>(plan.seed_bits), 11);
    detector::MeasurementConfig cfg;
    cfg.conversion_gain = 350;
    const std::vector<detector::RawSampleBlock> blocks{detector::measure_stream(states::Vacuum{}, cfg, 3080, 9)};
    auto cert = certificate(5.6);
    cert.fresh = false;
    cert.scheduler_decision = "alarm";
    CHECK_THROWS_AS(extract_stream(blocks, plan, seed, cert), StaleCalibration);
    CHECK_THROWS_AS(extract_stream(blocks, plan, seed, certificate(5.4)), CalibrationError);
    CHECK_THROWS_AS(extract_stream(blocks, plan, make_test_seed(100, 1), certificate(5.6)), InvalidInput);
    auto six = blocks;
    six[0].config.adc_bits = 6;
    CHECK_THROWS_AS(extract_stream(six, plan, seed, certificate(5.6)), InvalidInput);
}
