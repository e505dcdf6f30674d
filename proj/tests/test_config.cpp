#include "doctest_main.hpp"

#include <string>

#include "cvqrng/config.hpp"
#include "cvqrng/error.hpp"

using namespace cvqrng;
using config::parse_config;

TEST_CASE("an empty file yields the defaults") {
    const auto c = parse_config("");
    const config::RunConfig d;
    CHECK(c.to_text() == d.to_text());
    CHECK(c.detector.conversion_gain == 350.0);
    CHECK(c.dsp.pulse_rate == c.detector.pulse_rate);
}

TEST_CASE("the shipped operating-point file spells out the defaults") {
    const auto c = config::load_config(std::string(CVQRNG_SOURCE_DIR) + "/configs/operating_point.ini");
    CHECK(c.to_text() == config::RunConfig{}.to_text());
}

TEST_CASE("to_text round-trips through the parser") {
    const auto c = parse_config(R"(
[states]
kind = mixture
terms = 0.25:0 0.75:3
[detector]
lo_phase = wrapped_gaussian
lo_theta = 0.5
lo_phase_width = 0.1
excess_noise_mode = power_proportional
[calibration]
operating_power = 0.8
[extractor]
seed_file = /tmp/seed.bin
)");
    CHECK(parse_config(c.to_text()).to_text() == c.to_text());
    const auto& m = std::get<states::Mixture>(c.state);
    REQUIRE(m.terms.size() == 2);
    CHECK(m.terms[1].probability == 0.75);
    CHECK(m.terms[1].n == 3u);
    CHECK(std::holds_alternative<detector::WrappedGaussianPhase>(c.detector.lo_phase));
    CHECK(*c.calibration.operating_power == 0.8);
}

TEST_CASE("comments, whitespace and floating integer notation are accepted") {
    const auto c = parse_config(R"(
; comment
# another
   [detector]
   n_samples   =   3e5
[run]
start_time = 2026-03-01T12:00:00Z
[states]
kind = fock
n = 4
)");
    CHECK(c.n_samples == 300000);
    CHECK(std::get<states::Fock>(c.state).n == 4u);
    CHECK(c.start_time == 1772366400);
}

TEST_CASE("unknown or malformed entries are configuration errors") {
    CHECK_THROWS_AS(parse_config("[detector]\nconversion_gian = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detectors]\nconversion_gain = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("conversion_gain = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detector]\nconversion_gain = 3\nconversion_gain = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detector]\nadc_bits = 8\n[detector]\nadc_bits = 8\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detector]\nconversion_gain = 3 ; inline\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detector]\nconversion_gain\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detector]\nadc_bits = 8.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detector]\nlo_phase = sometimes\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[states]\nkind = cat\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[states]\nkind = mixture\nterms = 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nstart_time = yesterday\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[run]\nrng_seed = -1\n"), ConfigError);
    CHECK_THROWS_AS(config::load_config("/nonexistent/cvqrng.ini"), ConfigError);
}

TEST_CASE("values are validated within and across sections") {
    CHECK_THROWS_AS(parse_config("[run]\nthreads = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detector]\nadc_bits = 20\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[detector]\nconversion_gain = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[dsp]\npulse_rate = 40e6\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[dsp]\nmodulation_freq = 30e6\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[dsp]\nfir_taps = 200\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[calibration]\npowers = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[calibration]\npowers = 1 -2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[extractor]\nh_min_per_sample = 9\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[stats]\nstring_length = 100\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[stats]\nalpha = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[attacklab]\nn_rounds = 100\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[states]\nkind = thermal\nmean_photons = -1\n"), ConfigError);
    // A detector pulse rate change carries over to the filter chain unless set there.
    CHECK_NOTHROW(parse_config("[detector]\npulse_rate = 40e6\n[dsp]\nmodulation_freq = 20e6\n"
                               "post_mod_lowpass_cutoff = 19.99e6\n"));
}

TEST_CASE("an infeasible extraction target is not a configuration error") {
    // Feasibility is decided by the planner at extraction time.
    CHECK_NOTHROW(parse_config("[extractor]\ntarget_bits_per_sample = 6\n"));
}
