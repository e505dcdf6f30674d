#include "doctest_main.hpp"

#include <cmath>
#include <numbers>

#include "cvqrng/detector.hpp"
#include "cvqrng/error.hpp"
#include "cvqrng/raw_block_io.hpp"
#include "oracles.hpp"

using namespace cvqrng;
using namespace cvqrng::detector;
using cvqrng::states::DisplacedSqueezed;
using cvqrng::states::Vacuum;

namespace {

// 8-bit ADC with a 1-raw-unit step; gain*P = 400 puts the vacuum sigma at 20 codes.
MeasurementConfig twenty_code_config() {
    MeasurementConfig c;
    c.adc_bits = 8;
    c.adc_full_scale = 256.0;
    c.conversion_gain = 400.0;
    c.lo_power = 1.0;
    return c;
}

// Exact variance of round-half-away(N(0, sigma^2)) clipped to the 8-bit range,
// computed by summing code probabilities in scipy:
//   sigma = 20          -> 400.08333318895126
//   sigma = 20 e^{-1}   -> 54.21744662797836
constexpr double kQuantizedVar20 = 400.08333318895126;
constexpr double kQuantizedVarSqueezed = 54.21744662797836;

}  // namespace

TEST_CASE("vacuum code variance matches the quantized-Gaussian oracle") {
    auto c = twenty_code_config();
    RngStream rng(1);
    const auto block = measure_block(Vacuum{}, c, 1'000'000, rng);
    const double var = oracle::sample_variance(block.codes);
    CHECK(std::abs(var / kQuantizedVar20 - 1.0) < 0.02);
    CHECK(block.clipped == 0);
}

TEST_CASE("vacuum codes do not depend on the LO phase policy") {
    auto fixed = twenty_code_config();
    fixed.lo_phase = FixedPhase{0.8};
    auto uniform = twenty_code_config();
    RngStream r1(10), r2(20);
    const auto a = measure_block(Vacuum{}, fixed, 1'000'000, r1);
    const auto b = measure_block(Vacuum{}, uniform, 1'000'000, r2);
    const double d = oracle::ks_two_sample_discrete(a.codes, b.codes, -128, 127);
    CHECK(oracle::ks_two_sample_pvalue(d, a.codes.size(), b.codes.size()) > 0.001);
}

TEST_CASE("squeezed quadrature variance ratio is e^{-2r}") {
    auto c = twenty_code_config();
    c.lo_phase = FixedPhase{0.0};
    RngStream r1(3), r2(4);
    const auto sq = measure_block(DisplacedSqueezed{1.0, 0.0, {0.0, 0.0}}, c, 1'000'000, r1);
    const auto vac = measure_block(Vacuum{}, c, 1'000'000, r2);
    const double ratio = oracle::sample_variance(sq.codes) / oracle::sample_variance(vac.codes);
    CHECK(std::abs(ratio / std::exp(-2.0) - 1.0) < 0.05);
    CHECK(ratio == doctest::Approx(kQuantizedVarSqueezed / kQuantizedVar20).epsilon(0.03));
}

TEST_CASE("code variance over m*P tends to one without electronic noise") {
    auto c = twenty_code_config();
    c.conversion_gain = 800.0;
    c.lo_power = 0.5;
    RngStream rng(5);
    const auto block = measure_block(Vacuum{}, c, 1'000'000, rng);
    CHECK(std::abs(oracle::sample_variance(block.codes) / (c.conversion_gain * c.lo_power) - 1.0) < 0.01);
}

TEST_CASE("quantization reproduces the analog mean") {
    auto c = twenty_code_config();
    c.lo_phase = FixedPhase{0.0};
    const DisplacedSqueezed coherent{0.0, 0.0, {0.37, 0.0}};
    const double analog_mean = std::numbers::sqrt2 * 0.37 * std::sqrt(2.0 * 400.0);
    RngStream rng(6);
    const std::size_t n = 1'000'000;
    const auto block = measure_block(coherent, c, static_cast<std::int64_t>(n), rng);
    const auto raw = dequantize(block.codes, c);
    CHECK(std::abs(oracle::mean(raw) - analog_mean) < c.adc_step() / 2 + 3.0 * 20.0 / std::sqrt(double(n)));
}

TEST_CASE("clipped fraction matches the out-of-range probability") {
    MeasurementConfig c;
    c.adc_bits = 6;              // codes -32..31
    c.adc_full_scale = 64.0;     // step 1
    c.conversion_gain = 400.0;   // sigma 20 codes
    RngStream rng(8);
    const std::size_t n = 1'000'000;
    const auto block = measure_block(Vacuum{}, c, static_cast<std::int64_t>(n), rng);
    // Rounded code < -32 means analog < -32.5; > 31 means analog >= 31.5.
    const double p = oracle::normal_cdf(-32.5, 0.0, 400.0) + (1.0 - oracle::normal_cdf(31.5, 0.0, 400.0));
    const double expected = p * n;
    CHECK(std::abs(static_cast<double>(block.clipped) - expected) < 3.0 * std::sqrt(n * p * (1 - p)));
    std::size_t at_edges = 0;
    bool in_range = true;
    for (auto code : block.codes) {
        in_range = in_range && code >= -32 && code <= 31;
        at_edges += (code == -32 || code == 31);
    }
    CHECK(in_range);
    CHECK(at_edges >= block.clipped);
}

TEST_CASE("round half away from zero with clipping") {
    MeasurementConfig c;  // step 1, codes -128..127
    CHECK(quantize(2.5, c) == 3);
    CHECK(quantize(-2.5, c) == -3);
    CHECK(quantize(2.49, c) == 2);
    CHECK(quantize(0.0, c) == 0);
    bool clipped = false;
    CHECK(quantize(127.4, c, &clipped) == 127);
    CHECK_FALSE(clipped);
    CHECK(quantize(127.5, c, &clipped) == 127);
    CHECK(clipped);
    CHECK(quantize(-1e9, c, &clipped) == -128);
    CHECK(clipped);
}

TEST_CASE("resolution in vacuum units") {
    MeasurementConfig c;  // step 1
    CHECK(adc_resolution_vacuum_units(c, 50.0, 1.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(adc_resolution_vacuum_units(c, 338.0, 1.0) == doctest::Approx(1.0 / 26.0).epsilon(1e-15));
    CHECK(adc_resolution_vacuum_units(c, 50.0, 4.0) == doctest::Approx(0.05).epsilon(1e-15));
    double prev = 1e300;
    for (double p = 0.1; p < 5.0; p += 0.1) {
        const double d = adc_resolution_vacuum_units(c, 50.0, p);
        CHECK(d < prev);
        prev = d;
    }
    CHECK_THROWS_AS(adc_resolution_vacuum_units(c, 0.0, 1.0), CalibrationError);
    CHECK_THROWS_AS(adc_resolution_vacuum_units(c, 50.0, -1.0), CalibrationError);
}

TEST_CASE("electronic and excess noise add in quadrature") {
    auto c = twenty_code_config();
    c.electronic_noise_var = 50.0;
    c.excess_noise_var = 30.0;
    c.excess_noise_mode = ExcessNoiseMode::PowerProportional;
    c.lo_power = 2.0;
    c.conversion_gain = 200.0;
    RngStream rng(12);
    const auto block = measure_block(Vacuum{}, c, 1'000'000, rng);
    const double expected = 200.0 * 2.0 + 50.0 + 30.0 * 2.0 + 1.0 / 12.0;
    CHECK(oracle::sample_variance(block.codes) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("wrapped-Gaussian phase stays in [0, 2pi) and centres on the mean") {
    RngStream rng(13);
    const LoPhasePolicy p = WrappedGaussianPhase{0.5, 0.1};
    double sum = 0.0;
    bool in_range = true;
    for (int i = 0; i < 10000; ++i) {
        const double t = draw_phase(p, rng);
        in_range = in_range && t >= 0.0 && t < 2 * std::numbers::pi;
        sum += t;
    }
    CHECK(in_range);
    CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("chunked stream is independent of thread count") {
    auto c = twenty_code_config();
    const auto a = measure_stream(Vacuum{}, c, 300'001, 99, 1, 1 << 14, 1);
    const auto b = measure_stream(Vacuum{}, c, 300'001, 99, 1, 1 << 14, 4);
    CHECK(a.codes == b.codes);
    const auto other = measure_stream(Vacuum{}, c, 300'001, 100, 1, 1 << 14, 1);
    CHECK(a.codes != other.codes);
}

TEST_CASE("invalid measurement requests are rejected") {
    auto c = twenty_code_config();
    RngStream rng(1);
    CHECK_THROWS_AS(measure_block(Vacuum{}, c, 0, rng), InvalidInput);
    c.adc_bits = 17;
    CHECK_THROWS_AS(measure_block(Vacuum{}, c, 10, rng), InvalidInput);
    c = twenty_code_config();
    c.electronic_noise_var = -1.0;
    CHECK_THROWS_AS(measure_block(Vacuum{}, c, 10, rng), InvalidInput);
    c = twenty_code_config();
    c.pulse_rate = 0.0;
    CHECK_THROWS_AS(measure_block(Vacuum{}, c, 10, rng), InvalidInput);
}

TEST_CASE("raw block file round trip and header layout") {
    auto c = twenty_code_config();
    c.adc_bits = 12;
    c.adc_full_scale = 4096.0;
    RngStream rng(77);
    auto block = measure_block(Vacuum{}, c, 1000, rng, 42);
    const auto bytes = io::encode_raw_block(block);
    std::size_t lines = 0, pos = 0;
    for (; lines < 8; ++lines) pos = bytes.find('\n', pos) + 1;
    CHECK(bytes.size() - pos == 2 * block.codes.size());
    CHECK(bytes.rfind("CVQRNG-RAW\nversion 1\nbits 12\ncount 1000\nconfig_hash ", 0) == 0);

    const auto decoded = io::decode_raw_block(bytes);
    CHECK(decoded.codes == block.codes);
    CHECK(decoded.bits == 12);
    CHECK(decoded.run_id == 42);
    CHECK(decoded.config_hash == c.hash());

    CHECK_THROWS_AS(io::decode_raw_block(bytes.substr(0, bytes.size() - 1)), InvalidInput);
    CHECK_THROWS_AS(io::decode_raw_block("garbage\n"), InvalidInput);

    CHECK(io::encode_codes_csv({-3, 0, 7}) == "code\n-3\n0\n7\n");
}
