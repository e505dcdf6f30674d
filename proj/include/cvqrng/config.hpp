#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvqrng/attacklab.hpp"
#include "cvqrng/calibration.hpp"
#include "cvqrng/detector.hpp"
#include "cvqrng/dsp.hpp"
#include "cvqrng/states.hpp"

// Run configuration. File grammar (see docs/config.md):
//   [section]            section header
//   key = value          one setting; whitespace around key and value is trimmed
//   # ... or ; ...       full-line comment
// Lists are whitespace separated. Unknown sections or keys are errors.
namespace cvqrng::config {

struct RunConfig {
    // [run]
    std::uint64_t rng_seed = 20190101;
    std::string output_dir = "out";
    unsigned threads = 1;
    /// Simulated clock origin; the library never reads the wall clock.
    std::int64_t start_time = 1767225600;  // 2026-01-01T00:00:00Z

    // [states]
    states::QuantumStateModel state = states::Vacuum{};

    // [detector]
    detector::MeasurementConfig detector = default_detector();
    std::int64_t n_samples = 2'000'000;

    // [dsp]
    dsp::FilterChainConfig dsp;
    std::size_t autocorrelation_max_lag = 400;
    std::int64_t autocorrelation_samples = 1'000'000;

    // [calibration]
    std::vector<double> calibration_powers{0.2, 0.4, 0.6, 0.8, 1.0};
    std::int64_t calibration_samples = 1'000'000;
    calibration::CalibrationOptions calibration;
    calibration::RecalibrationPolicy recalibration;
    std::string calibration_log = "calibration.log";

    // [entropy]
    std::vector<double> verify_deltas{0.01, 0.05, 0.1, 0.5, 1.0};
    unsigned verify_max_fock = 20;

    // [extractor]
    double h_min_per_sample = 5.53;
    double log2_inv_epsilon = 100.0;
    double target_bits_per_sample = 5.4;
    std::string seed_file;

    // [stats]
    std::size_t n_strings = 100;
    std::size_t string_length = 100'000;
    double alpha = 0.01;

    // [attacklab]
    double attack_r = 1.5;
    double attack_delta = 0.1;
    std::int64_t attack_rounds = 1'000'000;
    double attack_lo_theta = 0.0;
    int verify_random_states = 100;
    int verify_max_dim = 8;

    static detector::MeasurementConfig default_detector();
    /// Cross-section consistency; throws ConfigError.
    void validate() const;
    /// Canonical key=value dump; parse_config(to_text()) reproduces the config.
    std::string to_text() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace cvqrng::config
