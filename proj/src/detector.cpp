#include "cvqrng/detector.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "cvqrng/error.hpp"

namespace cvqrng::detector {

void MeasurementConfig::validate() const {
    if (adc_bits < 2 || adc_bits > 16) throw InvalidInput("adc_bits must be in [2, 16]");
    if (!(adc_full_scale > 0.0) || !std::isfinite(adc_full_scale))
        throw InvalidInput("adc_full_scale must be > 0");
    if (!(lo_power > 0.0) || !std::isfinite(lo_power)) throw InvalidInput("lo_power must be > 0");
    if (!(pulse_rate > 0.0) || !std::isfinite(pulse_rate)) throw InvalidInput("pulse_rate must be > 0");
    if (!(electronic_noise_var >= 0.0) || !std::isfinite(electronic_noise_var))
        throw InvalidInput("electronic_noise_var must be >= 0");
    if (!(excess_noise_var >= 0.0) || !std::isfinite(excess_noise_var))
        throw InvalidInput("excess_noise_var must be >= 0");
    if (!(conversion_gain > 0.0) || !std::isfinite(conversion_gain))
        throw InvalidInput("conversion_gain must be > 0");
    if (const auto* w = std::get_if<WrappedGaussianPhase>(&lo_phase)) {
        if (!(w->width >= 0.0) || !std::isfinite(w->width) || !std::isfinite(w->center))
            throw InvalidInput("wrapped-Gaussian phase width must be >= 0");
    }
    if (const auto* f = std::get_if<FixedPhase>(&lo_phase); f && !std::isfinite(f->theta))
        throw InvalidInput("fixed LO phase must be finite");
}

double MeasurementConfig::adc_step() const {
    return adc_full_scale / std::ldexp(1.0, adc_bits);
}

std::string MeasurementConfig::describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "lo_phase=";
    if (const auto* f = std::get_if<FixedPhase>(&lo_phase)) os << "fixed:" << f->theta;
    else if (const auto* w = std::get_if<WrappedGaussianPhase>(&lo_phase))
        os << "wrapped_gaussian:" << w->center << ":" << w->width;
    else os << "uniform";
    os << ";lo_power=" << lo_power << ";pulse_rate=" << pulse_rate << ";adc_bits=" << adc_bits
       << ";adc_full_scale=" << adc_full_scale << ";electronic_noise_var=" << electronic_noise_var
       << ";excess_noise_var=" << excess_noise_var << ";excess_noise_mode="
       << (excess_noise_mode == ExcessNoiseMode::Constant ? "constant" : "power_proportional")
       << ";conversion_gain=" << conversion_gain;
    return os.str();
}

std::uint64_t MeasurementConfig::hash() const {
    return fnv1a64(describe());
}

std::int32_t quantize(double analog, const MeasurementConfig& config, bool* clipped) {
    const double scaled = analog / config.adc_step();
    const double rounded = std::round(scaled);  // halves go away from zero
    const double lo = config.code_min();
    const double hi = config.code_max();
    const bool out = rounded < lo || rounded > hi;
    if (clipped) *clipped = out;
    return static_cast<std::int32_t>(std::clamp(rounded, lo, hi));
}

double draw_phase(const LoPhasePolicy& policy, RngStream& rng) {
    if (const auto* f = std::get_if<FixedPhase>(&policy)) return states::reduce_phase(f->theta);
    if (const auto* w = std::get_if<WrappedGaussianPhase>(&policy))
        return states::reduce_phase(rng.normal(w->center, w->width));
    return rng.phase();
}

namespace {

struct AnalogChain {
    double scale, electronic_sd, excess_sd;

    explicit AnalogChain(const MeasurementConfig& config)
        : scale(std::sqrt(2.0 * config.conversion_gain * config.lo_power)),
          electronic_sd(std::sqrt(config.electronic_noise_var)),
          excess_sd(std::sqrt(config.excess_noise_mode == ExcessNoiseMode::PowerProportional
                                  ? config.excess_noise_var * config.lo_power
                                  : config.excess_noise_var)) {}

    double operator()(states::QuadratureSampler& sampler, const LoPhasePolicy& policy, RngStream& rng) const {
        const double theta = draw_phase(policy, rng);
        double analog = sampler(theta, rng) * scale;
        if (electronic_sd > 0.0) analog += electronic_sd * rng.normal();
        if (excess_sd > 0.0) analog += excess_sd * rng.normal();
        return analog;
    }
};

void fill(states::QuadratureSampler& sampler, const MeasurementConfig& config, RngStream& rng,
          std::span<std::int16_t> out, std::uint64_t& clipped) {
    const AnalogChain chain(config);
    for (auto& code : out) {
        bool was_clipped = false;
        code = static_cast<std::int16_t>(quantize(chain(sampler, config.lo_phase, rng), config, &was_clipped));
        clipped += was_clipped ? 1 : 0;
    }
}

}  // namespace

RawSampleBlock measure_block(const states::QuantumStateModel& state, const MeasurementConfig& config,
                             std::int64_t count, RngStream& rng, std::uint64_t run_id) {
    if (count <= 0) throw InvalidInput("sample count must be >= 1");
    config.validate();
    states::QuadratureSampler sampler(state);
    RawSampleBlock block;
    block.config = config;
    block.run_id = run_id;
    block.codes.resize(static_cast<std::size_t>(count));
    fill(sampler, config, rng, block.codes, block.clipped);
    return block;
}

RawSampleBlock measure_stream(const states::QuantumStateModel& state, const MeasurementConfig& config,
                              std::int64_t count, std::uint64_t seed, std::uint64_t run_id,
                              std::int64_t chunk, unsigned threads) {
    if (count <= 0) throw InvalidInput("sample count must be >= 1");
    if (chunk <= 0) throw InvalidInput("chunk size must be >= 1");
    config.validate();
    states::validate(state);

    RawSampleBlock block;
    block.config = config;
    block.run_id = run_id;
    block.codes.resize(static_cast<std::size_t>(count));
    const auto n_chunks = static_cast<std::size_t>((count + chunk - 1) / chunk);
    std::vector<std::uint64_t> clipped(n_chunks, 0);

    auto worker = [&](std::size_t first, std::size_t stride) {
        states::QuadratureSampler sampler(state);
        for (std::size_t c = first; c < n_chunks; c += stride) {
            RngStream rng = RngStream::substream(seed, "detector", c);
            const auto begin = static_cast<std::int64_t>(c) * chunk;
            const auto len = std::min(chunk, count - begin);
            fill(sampler, config, rng,
                 std::span(block.codes).subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(len)),
                 clipped[c]);
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_chunks)));
    if (threads == 1) {
        worker(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    }
    for (auto c : clipped) block.clipped += c;
    return block;
}

std::vector<double> measure_analog(const states::QuantumStateModel& state, const MeasurementConfig& config,
                                   std::int64_t count, std::uint64_t seed) {
    if (count <= 0) throw InvalidInput("sample count must be >= 1");
    config.validate();
    states::QuadratureSampler sampler(state);
    RngStream rng = RngStream::substream(seed, "analog", 0);
    const AnalogChain chain(config);
    std::vector<double> out(static_cast<std::size_t>(count));
    for (auto& v : out) v = chain(sampler, config.lo_phase, rng);
    return out;
}

double adc_resolution_vacuum_units(const MeasurementConfig& config, double gradient, double power) {
    if (!(gradient > 0.0) || !std::isfinite(gradient))
        throw CalibrationError("calibration gradient must be > 0");
    if (!(power > 0.0) || !std::isfinite(power)) throw CalibrationError("LO power must be > 0");
    return config.adc_step() / std::sqrt(2.0 * gradient * power);
}

std::vector<double> dequantize(std::span<const std::int16_t> codes, const MeasurementConfig& config) {
    const double step = config.adc_step();
    std::vector<double> out(codes.size());
    std::transform(codes.begin(), codes.end(), out.begin(), [step](std::int16_t c) { return c * step; });
    return out;
}

}  // namespace cvqrng::detector
