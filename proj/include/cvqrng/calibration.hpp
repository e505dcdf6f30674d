#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvqrng/detector.hpp"
#include "cvqrng/states.hpp"

namespace cvqrng::calibration {

struct CalibrationPoint {
    double power = 0.0;
    double variance = 0.0;  // raw units^2
    std::int64_t n_samples = 0;
};

struct CalibrationOptions {
    double adc_step = 1.0;
    /// Defaults to the largest calibrated power.
    std::optional<double> operating_power;
    int min_points = 5;
    double min_span_ratio = 2.0;
    std::int64_t min_samples_per_point = 10'000;
    /// delta_conservative uses m - conservatism_sigmas * gradient_stderr.
    double conservatism_sigmas = 2.0;
};

struct CalibrationResult {
    double gradient = 0.0;
    double intercept = 0.0;
    double gradient_stderr = 0.0;
    double intercept_stderr = 0.0;
    double r_squared = 0.0;
    double operating_power = 0.0;
    double adc_step = 0.0;
    double delta = 0.0;
    double delta_conservative = 0.0;
    /// Certified min-entropy at delta_conservative.
    double h_min_bits = 0.0;
    bool negative_intercept_warning = false;
    std::size_t n_points = 0;
    std::int64_t samples_per_point = 0;
    /// Seconds since the Unix epoch, supplied by the caller's clock.
    std::int64_t timestamp = 0;

    /// ISO timestamp followed by key=value fields, round-trippable.
    std::string to_log_line() const;
    static CalibrationResult from_log_line(const std::string& line);
};

/// OLS of variance on power. Throws CalibrationError when the design is degenerate
/// or when m - k*stderr <= 0.
CalibrationResult fit_calibration(std::span<const CalibrationPoint> points, const CalibrationOptions& options = {},
                                  std::int64_t timestamp = 0);

/// Blocked-signal sweep: the detector sees vacuum at each LO power; variance is
/// taken over the dequantized codes.
std::vector<CalibrationPoint> simulate_sweep(const detector::MeasurementConfig& config,
                                             std::span<const double> powers, std::int64_t samples_per_point,
                                             std::uint64_t seed, unsigned threads = 1);

struct RecalibrationPolicy {
    std::int64_t interval_seconds = 600;
    /// Relative change of successive min-entropy bounds that raises an alarm.
    double drift_threshold = 0.02;
};

enum class Decision { Keep, Recalibrate, Alarm };

std::string to_string(Decision d);

/// Alarm if the last two bounds differ by more than the threshold, else recalibrate
/// once the interval since the last calibration has elapsed, else keep.
Decision recalibration_scheduler(std::span<const CalibrationResult> history, const RecalibrationPolicy& policy,
                                 std::int64_t now);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string iso_timestamp(std::int64_t seconds_since_epoch);
std::int64_t parse_iso_timestamp(const std::string& text);

/// Reads every non-empty, non-comment line of a calibration log.
std::vector<CalibrationResult> read_log(const std::string& path);
void append_log(const std::string& path, const CalibrationResult& result);

}  // namespace cvqrng::calibration
