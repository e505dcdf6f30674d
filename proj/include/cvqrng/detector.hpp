#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cvqrng/rng.hpp"
#include "cvqrng/states.hpp"

namespace cvqrng::detector {

struct FixedPhase {
    double theta = 0.0;
};

/// Independent uniform phase per pulse (ideal gain-switched LO).
struct UniformPhase {};

/// Imperfect randomization: theta = centre + width * N(0,1), wrapped to [0, 2pi).
struct WrappedGaussianPhase {
    double center = 0.0;
    double width = 0.0;
};

using LoPhasePolicy = std::variant<FixedPhase, UniformPhase, WrappedGaussianPhase>;

enum class ExcessNoiseMode { Constant, PowerProportional };

/// Balanced homodyne detector + ADC. Raw units are ADC-input units; one code
/// step is adc_full_scale / 2^adc_bits raw units.
struct MeasurementConfig {
    LoPhasePolicy lo_phase = UniformPhase{};
    double lo_power = 1.0;
    double pulse_rate = 50e6;
    int adc_bits = 8;
    double adc_full_scale = 256.0;
    double electronic_noise_var = 0.0;
    double excess_noise_var = 0.0;
    ExcessNoiseMode excess_noise_mode = ExcessNoiseMode::Constant;
    /// Raw units^2 per (power unit x vacuum-unit variance); the calibration gradient m.
    double conversion_gain = 1.0;

    void validate() const;
    double adc_step() const;
    std::int32_t code_min() const { return -(1 << (adc_bits - 1)); }
    std::int32_t code_max() const { return (1 << (adc_bits - 1)) - 1; }
    /// Canonical one-line description; hashed into raw block headers.
    std::string describe() const;
    std::uint64_t hash() const;
};

struct RawSampleBlock {
    std::vector<std::int16_t> codes;
    MeasurementConfig config;
    std::uint64_t run_id = 0;
    std::uint64_t clipped = 0;
};

/// Half-away-from-zero rounding of analog / adc_step, clipped into the code range.
std::int32_t quantize(double analog, const MeasurementConfig& config, bool* clipped = nullptr);

/// Draws the LO phase for one pulse.
double draw_phase(const LoPhasePolicy& policy, RngStream& rng);

/// One block of `count` pulses from a single stream.
RawSampleBlock measure_block(const states::QuantumStateModel& state, const MeasurementConfig& config,
                             std::int64_t count, RngStream& rng, std::uint64_t run_id = 0);

/// `count` pulses split into chunks of `chunk` pulses, chunk i drawn from substream
/// ("detector", i) of `seed`. Output is independent of `threads`.
RawSampleBlock measure_stream(const states::QuantumStateModel& state, const MeasurementConfig& config,
                              std::int64_t count, std::uint64_t seed, std::uint64_t run_id = 0,
                              std::int64_t chunk = 1 << 16, unsigned threads = 1);

/// Detector output before the ADC (raw units), for exercising the filter chain.
std::vector<double> measure_analog(const states::QuantumStateModel& state, const MeasurementConfig& config,
                                   std::int64_t count, std::uint64_t seed);

/// Measurement resolution in vacuum units: adc_step / sqrt(2 m P).
double adc_resolution_vacuum_units(const MeasurementConfig& config, double gradient, double power);

/// Codes as raw-unit doubles (code * adc_step).
std::vector<double> dequantize(std::span<const std::int16_t> codes, const MeasurementConfig& config);

}  // namespace cvqrng::detector
