#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cvqrng/config.hpp"

// End-to-end commands. Every artifact lands in config.output_dir and is written
// atomically; identical config and seed give byte-identical artifacts.
namespace cvqrng::pipeline {

namespace fs = std::filesystem;

/// File names inside the output directory.
namespace artifact {
inline constexpr const char* kRaw = "raw.bin";
inline constexpr const char* kSimulateReport = "simulate_report.txt";
inline constexpr const char* kAutocorrelation = "fig3b_autocorrelation.csv";
inline constexpr const char* kRawHistogram = "fig4b_raw_histogram.csv";
inline constexpr const char* kCalibrationReport = "calibration_report.txt";
inline constexpr const char* kCalibrationLine = "fig4a_calibration_line.csv";
inline constexpr const char* kOutput = "output.bin";
inline constexpr const char* kExtractionReport = "extraction_report.txt";
inline constexpr const char* kBatteryText = "battery.txt";
inline constexpr const char* kBatteryCsv = "battery.csv";
inline constexpr const char* kAttackFixed = "attack_fixed_lo.txt";
inline constexpr const char* kAttackRandom = "attack_random_lo.txt";
inline constexpr const char* kAttackFixedHistogram = "fig1d_fixed_lo_histogram.csv";
inline constexpr const char* kAttackRandomHistogram = "fig1e_random_lo_histogram.csv";
inline constexpr const char* kVerifyReport = "verify_report.txt";
}  // namespace artifact

struct CommandResult {
    std::vector<fs::path> artifacts;
    /// Short human-readable outcome, one line per item.
    std::string summary;
};

fs::path output_path(const config::RunConfig& config, const std::string& name);
fs::path calibration_log_path(const config::RunConfig& config);

/// Vacuum probability of each ADC code when the quadrature variance maps to
/// conversion_gain * lo_power raw units^2.
std::vector<double> vacuum_code_distribution(const detector::MeasurementConfig& detector);

CommandResult cmd_simulate(const config::RunConfig& config);

/// Sweeps the configured powers, fits the line and appends one log entry stamped
/// start_time + interval_seconds * (entries already in the log).
CommandResult cmd_calibrate(const config::RunConfig& config);

/// Hashes raw.bin with the latest calibration. The scheduler runs at the simulated
/// time the acquisition ends; anything but "keep" refuses extraction.
CommandResult cmd_extract(const config::RunConfig& config);

/// Runs the battery on `bitstream` (default: output.bin in the output directory).
CommandResult cmd_test(const config::RunConfig& config, const std::optional<fs::path>& bitstream = std::nullopt);

CommandResult cmd_attack(const config::RunConfig& config);

struct VerifyCheck {
    std::string name;
    bool passed = false;
    /// Distance to the failure threshold, in the check's own units (larger is safer).
    double margin = 0.0;
    std::string detail;
};

std::vector<VerifyCheck> run_verify_checks(const config::RunConfig& config);

/// Writes the verify report, then throws VerificationFailure if any check failed.
CommandResult cmd_verify(const config::RunConfig& config);

/// Exit status for an exception escaping a command.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace cvqrng::pipeline
