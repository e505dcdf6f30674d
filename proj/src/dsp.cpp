#include "cvqrng/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fftw3.h>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "cvqrng/error.hpp"
#include "fftw_support.hpp"

namespace cvqrng::dsp {
namespace {

void check_taps(int taps) {
    if (taps < 3 || taps % 2 == 0) throw InvalidInput("FIR tap count must be odd and >= 3");
}

std::vector<double> windowed_sinc(double normalized_cutoff, int taps) {
    const int mid = taps / 2;
    std::vector<double> h(static_cast<std::size_t>(taps));
    double sum = 0.0;
    for (int n = 0; n < taps; ++n) {
        const double t = n - mid;
        const double x = 2.0 * normalized_cutoff * t;
        const double sinc = t == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (taps - 1));
        h[static_cast<std::size_t>(n)] = 2.0 * normalized_cutoff * sinc * window;
        sum += h[static_cast<std::size_t>(n)];
    }
    for (auto& v : h) v /= sum;
    return h;
}

// Index into x with reflection about both ends (x[-1] = x[1], x[n] = x[n-2]).
inline std::size_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
    const std::ptrdiff_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return static_cast<std::size_t>(i < n ? i : period - i);
}

}  // namespace

void FilterChainConfig::validate() const {
    if (!(input_rate > 0.0) || !(pulse_rate > 0.0)) throw InvalidInput("rates must be > 0");
    if (!(lowpass_cutoff > 0.0) || lowpass_cutoff >= input_rate / 2)
        throw InvalidInput("lowpass_cutoff must lie in (0, input_rate/2)");
    if (!(post_mod_lowpass_cutoff > 0.0) || post_mod_lowpass_cutoff >= pulse_rate / 2)
        throw InvalidInput("post_mod_lowpass_cutoff must lie in (0, pulse_rate/2)");
    if (!(modulation_freq > 0.0) || modulation_freq > pulse_rate / 2)
        throw InvalidInput("modulation_freq must lie in (0, pulse_rate/2]");
    if (!(sample_phase >= 0.0 && sample_phase < 1.0)) throw InvalidInput("sample_phase must be in [0, 1)");
    check_taps(fir_taps);
    check_taps(post_mod_taps);
    const double ratio = input_rate / pulse_rate;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
        throw InvalidInput("input_rate must be an integer multiple of pulse_rate");
}

double magnitude_response(std::span<const double> taps, double rate, double freq) {
    std::complex<double> acc = 0.0;
    const double w = 2.0 * std::numbers::pi * freq / rate;
    for (std::size_t n = 0; n < taps.size(); ++n) acc += taps[n] * std::polar(1.0, -w * static_cast<double>(n));
    return std::abs(acc);
}

std::vector<double> design_lowpass(double rate, double cutoff, int taps) {
    check_taps(taps);
    if (!(rate > 0.0) || !(cutoff > 0.0) || cutoff >= rate / 2)
        throw InvalidInput("cutoff must lie in (0, rate/2)");
    const double target = std::sqrt(0.5);
    const double fc = cutoff / rate;
    // |H(fc)| increases monotonically with the design frequency; bisect it in (0, 1/2).
    double lo = 1e-9, hi = 0.5;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto h = windowed_sinc(mid, taps);
        if (magnitude_response(h, 1.0, fc) < target) lo = mid;
        else hi = mid;
    }
    auto h = windowed_sinc(0.5 * (lo + hi), taps);
    if (std::abs(magnitude_response(h, 1.0, fc) - target) > 1e-3)
        throw InvalidInput("cannot place the -3 dB point at the requested cutoff with this tap count");
    return h;
}

std::size_t transient_margin(int taps) {
    return static_cast<std::size_t>(taps / 2);
}

namespace {

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

// Forward/inverse real plans of one size, created and destroyed under the planner lock.
class RealFftPair {
public:
    explicit RealFftPair(std::size_t size)
        : size_(size),
          real_(fftw_alloc_real(size)),
          spectrum_(fftw_alloc_complex(size / 2 + 1)) {
        const std::lock_guard lock(detail::fftw_planner_mutex());
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(size), real_.get(), spectrum_.get(), FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(size), spectrum_.get(), real_.get(), FFTW_ESTIMATE);
    }
    ~RealFftPair() {
        const std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }
    RealFftPair(const RealFftPair&) = delete;
    RealFftPair& operator=(const RealFftPair&) = delete;

    double* real() { return real_.get(); }
    fftw_complex* spectrum() { return spectrum_.get(); }
    void forward() { fftw_execute(forward_); }
    void inverse() { fftw_execute(inverse_); }
    std::size_t size() const { return size_; }

private:
    std::size_t size_;
    FftwBuffer<double> real_;
    FftwBuffer<fftw_complex> spectrum_;
    fftw_plan forward_ = nullptr, inverse_ = nullptr;
};

// Overlap-save: out[i] = sum_k taps[k] * padded[i + t - 1 - k] for i < n. Fixed block
// boundaries make the result independent of how blocks are shared among threads.
void overlap_save(const std::vector<double>& padded, std::span<const double> taps, std::vector<double>& out,
                  unsigned threads) {
    const std::size_t t = taps.size();
    std::size_t size = 8192;
    while (size < 4 * t) size *= 2;
    const std::size_t step = size - (t - 1);
    const std::size_t n = out.size();
    const std::size_t n_blocks = (n + step - 1) / step;

    std::vector<std::complex<double>> response(size / 2 + 1);
    {
        RealFftPair fft(size);
        std::fill(fft.real(), fft.real() + size, 0.0);
        std::copy(taps.begin(), taps.end(), fft.real());
        fft.forward();
        for (std::size_t j = 0; j < response.size(); ++j)
            response[j] = std::complex<double>(fft.spectrum()[j][0], fft.spectrum()[j][1]) / static_cast<double>(size);
    }

    auto work = [&](std::size_t first, std::size_t stride) {
        RealFftPair fft(size);
        for (std::size_t b = first; b < n_blocks; b += stride) {
            const std::size_t start = b * step;
            const std::size_t avail = std::min(size, padded.size() - start);
            std::copy_n(padded.begin() + static_cast<std::ptrdiff_t>(start), avail, fft.real());
            std::fill(fft.real() + avail, fft.real() + size, 0.0);
            fft.forward();
            for (std::size_t j = 0; j < response.size(); ++j) {
                const auto v = std::complex<double>(fft.spectrum()[j][0], fft.spectrum()[j][1]) * response[j];
                fft.spectrum()[j][0] = v.real();
                fft.spectrum()[j][1] = v.imag();
            }
            fft.inverse();
            const std::size_t count = std::min(step, n - start);
            std::copy_n(fft.real() + (t - 1), count, out.begin() + static_cast<std::ptrdiff_t>(start));
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_blocks)));
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    }
}

}  // namespace

std::vector<double> apply_fir(std::span<const double> samples, std::span<const double> taps,
                              unsigned threads) {
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
    const auto t = static_cast<std::ptrdiff_t>(taps.size());
    if (t % 2 == 0) throw InvalidInput("FIR must have an odd number of taps");
    const std::ptrdiff_t half = t / 2;
    if (n < 2 || n <= half) throw InvalidInput("sequence shorter than half the filter length");

    // Padded copy so the inner loop has no branches.
    std::vector<double> padded(static_cast<std::size_t>(n + 2 * half));
    for (std::ptrdiff_t i = 0; i < n + 2 * half; ++i) padded[static_cast<std::size_t>(i)] = samples[reflect(i - half, n)];

    if (t > kDirectFirMaxTaps) {
        std::vector<double> out(samples.size());
        overlap_save(padded, taps, out, threads);
        return out;
    }

    // Reversed taps, zero-padded to a multiple of the lane count, so the dot product
    // runs forward over eight independent partial sums that vectorize.
    constexpr std::ptrdiff_t lanes = 8;
    const std::ptrdiff_t t_padded = (t + lanes - 1) / lanes * lanes;
    std::vector<double> rev(static_cast<std::size_t>(t_padded), 0.0);
    for (std::ptrdiff_t k = 0; k < t; ++k) rev[static_cast<std::size_t>(k)] = taps[static_cast<std::size_t>(t - 1 - k)];
    padded.resize(padded.size() + static_cast<std::size_t>(t_padded - t), 0.0);

    std::vector<double> out(samples.size());
    auto work = [&](std::ptrdiff_t begin, std::ptrdiff_t end) {
        for (std::ptrdiff_t i = begin; i < end; ++i) {
            const double* x = padded.data() + i;
            double acc[lanes] = {};
            for (std::ptrdiff_t k = 0; k < t_padded; k += lanes)
                for (std::ptrdiff_t l = 0; l < lanes; ++l) acc[l] += rev[static_cast<std::size_t>(k + l)] * x[k + l];
            out[static_cast<std::size_t>(i)] =
                ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
        }
    };
    // Each output index is computed by the same expression regardless of the split.
    threads = std::max(1u, threads);
    if (threads == 1 || n < 4096) {
        work(0, n);
    } else {
        std::vector<std::jthread> pool;
        const std::ptrdiff_t chunk = (n + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::ptrdiff_t b = w * chunk;
            const std::ptrdiff_t e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
    }
    return out;
}

std::vector<double> lowpass(std::span<const double> samples, double rate, double cutoff, int taps,
                            unsigned threads) {
    if (!(cutoff < rate / 2)) throw InvalidInput("cutoff must be below Nyquist");
    const auto h = design_lowpass(rate, cutoff, taps);
    return apply_fir(samples, h, threads);
}

std::vector<double> subsample_per_pulse(std::span<const double> samples, double input_rate,
                                        double pulse_rate, double sample_phase) {
    if (!(input_rate > 0.0) || !(pulse_rate > 0.0)) throw InvalidInput("rates must be > 0");
    const double ratio_real = input_rate / pulse_rate;
    const double ratio_rounded = std::round(ratio_real);
    if (ratio_rounded < 1.0 || std::abs(ratio_real - ratio_rounded) > 1e-9 * ratio_real)
        throw InvalidInput("input_rate must be an integer multiple of pulse_rate");
    if (!(sample_phase >= 0.0 && sample_phase < 1.0)) throw InvalidInput("sample_phase must be in [0, 1)");
    const auto ratio = static_cast<std::size_t>(ratio_rounded);
    const auto offset = std::min(ratio - 1, static_cast<std::size_t>(std::llround(sample_phase * ratio_rounded)));
    const std::size_t pulses = samples.size() / ratio;
    std::vector<double> out(pulses);
    for (std::size_t k = 0; k < pulses; ++k) out[k] = samples[k * ratio + offset];
    return out;
}

std::vector<double> remove_low_frequency(std::span<const double> samples, double pulse_rate,
                                         double modulation_freq, double cutoff, int taps,
                                         unsigned threads) {
    if (!(modulation_freq > 0.0) || modulation_freq > pulse_rate / 2)
        throw InvalidInput("modulation_freq must lie in (0, pulse_rate/2]");
    const bool nyquist = modulation_freq == pulse_rate / 2;
    std::vector<double> carrier(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        carrier[k] = nyquist ? ((k % 2 == 0) ? 1.0 : -1.0)
                             : std::cos(2.0 * std::numbers::pi * modulation_freq * static_cast<double>(k) / pulse_rate);
    }
    std::vector<double> mixed(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) mixed[k] = samples[k] * carrier[k];
    auto filtered = lowpass(mixed, pulse_rate, cutoff, taps, threads);
    const double gain = nyquist ? 1.0 : 2.0;
    for (std::size_t k = 0; k < filtered.size(); ++k) filtered[k] *= gain * carrier[k];
    return filtered;
}

std::vector<double> filter_pulse_samples(std::span<const double> samples, const FilterChainConfig& config,
                                         unsigned threads) {
    config.validate();
    return remove_low_frequency(samples, config.pulse_rate, config.modulation_freq,
                                config.post_mod_lowpass_cutoff, config.post_mod_taps, threads);
}

AutocorrelationReport autocorrelation(std::span<const double> samples, std::size_t max_lag) {
    const std::size_t n = samples.size();
    if (max_lag == 0 || n <= 10 * max_lag) throw InvalidInput("autocorrelation needs n > 10 * max_lag");
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    std::vector<double> centred(n);
    for (std::size_t i = 0; i < n; ++i) centred[i] = samples[i] - mean;
    double c0 = 0.0;
    for (double x : centred) c0 += x * x;
    if (!(c0 > 0.0)) throw InvalidInput("autocorrelation of a constant sequence is undefined");

    AutocorrelationReport r;
    r.n_samples = n;
    r.ci95 = 1.96 / std::sqrt(static_cast<double>(n));
    r.coefficients.assign(max_lag + 1, 0.0);
    r.coefficients[0] = 1.0;
    std::size_t outside = 0;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        double acc = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) acc += centred[i] * centred[i + lag];
        r.coefficients[lag] = std::clamp(acc / c0, -1.0, 1.0);
        outside += std::abs(r.coefficients[lag]) > r.ci95 ? 1 : 0;
    }
    r.fraction_outside_ci = static_cast<double>(outside) / static_cast<double>(max_lag);
    return r;
}

std::string AutocorrelationReport::to_csv(const std::string& title) const {
    std::ostringstream os;
    os.precision(12);
    if (!title.empty()) os << "# " << title << '\n';
    os << "# n_samples=" << n_samples << " ci95=" << ci95 << " fraction_outside_ci=" << fraction_outside_ci << '\n';
    os << "lag,coefficient\n";
    for (std::size_t k = 0; k < coefficients.size(); ++k) os << k << ',' << coefficients[k] << '\n';
    return os.str();
}

}  // namespace cvqrng::dsp
