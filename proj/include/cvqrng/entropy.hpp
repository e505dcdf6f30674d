#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cvqrng/states.hpp"

namespace cvqrng::entropy {

enum class BoundBasis { Vacuum };

/// Certified min-entropy per sample. The vacuum bound is the only certified basis;
/// it also bounds the conditional min-entropy against Eve for any Fock-diagonal input.
struct EntropyBound {
    double delta = 0.0;
    double p_guess_bound = 1.0;
    double h_min_bits = 0.0;
    BoundBasis basis = BoundBasis::Vacuum;
};

std::string to_string(BoundBasis basis);

/// p_guess = erf(delta/2), h_min = -log2 p_guess.
EntropyBound vacuum_min_entropy(double delta);

/// delta such that vacuum_min_entropy(delta).h_min_bits == h_min_bits.
double delta_for_min_entropy(double h_min_bits);

/// delta / sqrt(pi): leading term of erf(delta/2). Only offered for delta in (0, 0.2].
double small_delta_guessing_probability(double delta);

struct SdiEntry {
    std::string state;
    double max_bin_probability = 0.0;
    double margin = 0.0;  // erf(delta/2) - max_bin_probability
};

struct SdiReport {
    double delta = 0.0;
    double vacuum_bound = 0.0;
    std::vector<SdiEntry> entries;
    double min_margin() const;
};

/// Allowance for quadrature error when comparing a numerically integrated bin to erf.
inline constexpr double kSdiTolerance = 1e-13;

/// Checks max_k P(bin k) <= erf(delta/2) for each Fock-diagonal state (theta = 0;
/// these states are phase invariant). Throws SecurityModelViolation on any excess
/// beyond kSdiTolerance.
SdiReport sdi_bound_check(std::span<const states::QuantumStateModel> candidates, double delta);

/// Diagnostic only, not a security bound: -log2 of the most frequent code's relative frequency.
struct DiagnosticEstimate {
    double h_min_bits = 0.0;
    double max_frequency = 0.0;
    std::size_t n_samples = 0;
    static constexpr bool certified = false;
};

DiagnosticEstimate diagnostic_histogram_min_entropy(std::span<const std::int16_t> codes);

/// Output bit rate of a generator producing `bits_per_sample` extracted bits per pulse.
double output_bit_rate(double pulse_rate, double bits_per_sample);

}  // namespace cvqrng::entropy
