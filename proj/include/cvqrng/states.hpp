#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <utility>
#include <variant>
#include <vector>

#include "cvqrng/rng.hpp"

// Quadrature statistics of single-mode states expressed in the Fock basis.
//
// Convention: [a, a^dagger] = 1 and Q_theta = (a e^{-i theta} + a^dagger e^{i theta}) / sqrt(2),
// so the vacuum quadrature is N(0, 1/2) and every bin width delta is in these
// "vacuum units". Bin k covers (k*delta - delta/2, k*delta + delta/2].
namespace cvqrng::states {

struct Vacuum {};

struct Fock {
    unsigned n = 0;
};

/// S(r e^{2i squeeze_angle}) D(displacement)|0>: squeezed along the quadrature
/// theta = squeeze_angle, anti-squeezed at squeeze_angle + pi/2.
struct DisplacedSqueezed {
    double r = 0.0;
    double squeeze_angle = 0.0;
    std::complex<double> displacement{0.0, 0.0};
};

struct Thermal {
    double mean_photons = 0.0;
};

struct FockTerm {
    double probability = 0.0;
    unsigned n = 0;
};

/// Classical mixture sum_n p_n |n><n|.
struct Mixture {
    std::vector<FockTerm> terms;
};

using QuantumStateModel = std::variant<Vacuum, Fock, DisplacedSqueezed, Thermal, Mixture>;

inline constexpr unsigned kMaxFockIndex = 4096;
inline constexpr unsigned kDefaultTruncation = 32;

/// Throws InvalidInput when an invariant of the state model is violated.
void validate(const QuantumStateModel& state);

/// Reduces an angle to [0, 2pi).
double reduce_phase(double theta);

struct QuadratureQuery {
    double theta;
    double q;

    static QuadratureQuery make(double theta, double q);
};

/// Normalized Hermite function psi_n(q) = pi^{-1/4} (2^n n!)^{-1/2} H_n(q) e^{-q^2/2}.
double fock_wavefunction(unsigned n, double q);

/// psi_0(q) .. psi_{n_max}(q), via the normalized three-term recurrence.
std::vector<double> fock_wavefunctions(unsigned n_max, double q);
void fock_wavefunctions(unsigned n_max, double q, std::vector<double>& out);

struct GaussianMoments {
    double mean;
    double variance;
};

bool is_gaussian(const QuantumStateModel& state);
bool is_fock_diagonal(const QuantumStateModel& state);

/// Quadrature mean and variance of a Gaussian-family state (Vacuum, DisplacedSqueezed, Thermal).
GaussianMoments gaussian_moments(const QuantumStateModel& state, double theta);

/// Thermal state as an explicit Fock mixture truncated at `dim` and renormalized.
Mixture to_fock_mixture(const Thermal& thermal, unsigned dim = kDefaultTruncation);

/// Largest Fock index with non-zero weight.
unsigned max_fock_index(const QuantumStateModel& state);

/// Half-width of the bin-search window for states supported up to Fock index n.
double search_radius(unsigned n);

/// Probability density <q_theta|rho|q_theta>.
double quadrature_pdf(const QuantumStateModel& state, double theta, double q);
double quadrature_pdf(const QuantumStateModel& state, const QuadratureQuery& query);

/// Exact probability of bin k (width delta) at LO phase theta.
double bin_probability(const QuantumStateModel& state, double theta, double delta,
                       std::int64_t k);

/// max_k of bin_probability over the search window.
double max_bin_probability(const QuantumStateModel& state, double theta, double delta);

/// Reusable sampler. Gaussian states draw directly; Fock-diagonal states invert a
/// tabulated CDF per Fock index (built lazily, cell width 1/512 vacuum units).
class QuadratureSampler {
public:
    explicit QuadratureSampler(QuantumStateModel state);

    double operator()(double theta, RngStream& rng);

    const QuantumStateModel& state() const { return state_; }

private:
    struct InverseCdf {
        double lo = 0.0;
        double cell = 0.0;
        std::vector<double> cdf;  // cdf[i] at lo + i*cell, cdf.back() == 1
    };

    double sample_fock(unsigned n, RngStream& rng);
    const InverseCdf& table(unsigned n);

    QuantumStateModel state_;
    std::vector<double> mixture_cumulative_;
    std::map<unsigned, InverseCdf> tables_;
};

/// One-shot draw; builds a sampler each call, so prefer QuadratureSampler in loops.
double sample_quadrature(const QuantumStateModel& state, double theta, RngStream& rng);

}  // namespace cvqrng::states
