#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

// Offline filtering chain: FIR low-pass at the digitizer rate, one sample per LO
// pulse, then removal of slow drift by Nyquist modulation + low-pass + demodulation.
namespace cvqrng::dsp {

struct FilterChainConfig {
    double input_rate = 40e9;
    double lowpass_cutoff = 1.6e9;
    double pulse_rate = 50e6;
    /// Fraction of the pulse period at which the single sample is taken, in [0, 1).
    double sample_phase = 0.5;
    double modulation_freq = 25e6;
    double post_mod_lowpass_cutoff = 24.995e6;
    int fir_taps = 201;
    int post_mod_taps = 32001;

    void validate() const;
};

/// Linear-phase windowed-sinc (Hamming) low-pass with unit DC gain whose -3 dB
/// point sits at `cutoff`.
std::vector<double> design_lowpass(double rate, double cutoff, int taps);

/// |H(f)| of an FIR at frequency f.
double magnitude_response(std::span<const double> taps, double rate, double freq);

/// Longer filters are applied by FFT (overlap-save) instead of direct convolution.
inline constexpr std::ptrdiff_t kDirectFirMaxTaps = 2047;

/// Zero-delay FIR application with reflect padding. The first and last
/// transient_margin(taps) outputs see padded data.
std::vector<double> apply_fir(std::span<const double> samples, std::span<const double> taps,
                              unsigned threads = 1);

std::size_t transient_margin(int taps);

std::vector<double> lowpass(std::span<const double> samples, double rate, double cutoff, int taps,
                            unsigned threads = 1);

std::vector<double> subsample_per_pulse(std::span<const double> samples, double input_rate,
                                        double pulse_rate, double sample_phase);

/// x[k] * c[k] -> low-pass -> * g*c[k], with c[k] = cos(2 pi f k / rate).
/// At f = rate/2 the carrier is (-1)^k and g = 1, which makes the chain a
/// linear-phase high-pass with its edge at rate/2 - cutoff. Elsewhere g = 2.
std::vector<double> remove_low_frequency(std::span<const double> samples, double pulse_rate,
                                         double modulation_freq, double cutoff, int taps,
                                         unsigned threads = 1);

/// Pulse-rate chain used on detector output: remove_low_frequency with the config's settings.
std::vector<double> filter_pulse_samples(std::span<const double> samples, const FilterChainConfig& config,
                                         unsigned threads = 1);

struct AutocorrelationReport {
    std::vector<double> coefficients;  // index = lag, 0..max_lag
    double ci95 = 0.0;
    std::size_t n_samples = 0;
    double fraction_outside_ci = 0.0;

    std::size_t max_lag() const { return coefficients.empty() ? 0 : coefficients.size() - 1; }
    /// "lag,coefficient" rows.
    std::string to_csv(const std::string& title = {}) const;
};

/// Normalized (biased) sample autocorrelation; requires n > 10 * max_lag and non-zero variance.
AutocorrelationReport autocorrelation(std::span<const double> samples, std::size_t max_lag);

}  // namespace cvqrng::dsp
