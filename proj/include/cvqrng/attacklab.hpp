#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cvqrng::attacklab {

/// Joint Eve/Alice density matrix; basis index of |k>_E |n>_A is k * dim_A + n.
struct BipartiteState {
    int dim_E = 1;
    int dim_A = 1;
    Eigen::MatrixXcd rho;

    /// Hermitian (1e-12), unit trace (1e-10), PSD (min eigenvalue >= -1e-10).
    void validate() const;
    int index(int k_eve, int n_alice) const { return k_eve * dim_A + n_alice; }
};

/// Printed: (1-g^2) sum g^(m+n) |n><n|_E (x) |m><m|_A (renormalized after truncation).
/// Correlated: sqrt(1-g^2) sum g^n |n>_E|n>_A, the usual two-mode squeezed vacuum.
enum class TwoModeForm { Printed, Correlated };

/// Rejects gamma outside [0, 1) and truncations with gamma^(2 dim) > 1e-8.
BipartiteState two_mode_squeezed(double gamma, int dim, TwoModeForm form = TwoModeForm::Printed);

BipartiteState product_state(const Eigen::MatrixXcd& rho_E, const Eigen::MatrixXcd& rho_A);
BipartiteState random_pure_state(int dim_E, int dim_A, std::uint64_t seed);

/// Uniform average over the phase of Alice's mode: drops every element with n != m.
BipartiteState phase_average_A(const BipartiteState& state);
/// The same average as a finite sum over M equally spaced phases (exact when M >= dim_A).
BipartiteState phase_average_A(const BipartiteState& state, int n_phases);

Eigen::MatrixXcd partial_trace_A(const BipartiteState& state);
Eigen::MatrixXcd partial_trace_E(const BipartiteState& state);
Eigen::MatrixXcd partial_transpose_A(const BipartiteState& state);
double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// <m| Q_{theta,delta,k} |n> = e^{i theta (m-n)} int_bin psi_m psi_n dq, 200-node
/// Gauss-Legendre over the bin. Throws for bins beyond the support of psi_{dim-1}.
Eigen::MatrixXcd bin_projector(int dim, double theta, double delta, int k);

/// tr_A[(I (x) Q) rho]: Eve's unnormalized state conditioned on Alice's bin.
Eigen::MatrixXcd conditional_eve_state(const BipartiteState& state, const Eigen::MatrixXcd& projector);

/// Phase-average first, then project with the fixed-theta bin operator.
Eigen::MatrixXcd eve_reduced_path_I(const BipartiteState& state, double theta, double delta, int k);
/// Project with phase-shifted operators, then average over n_phases (default 4 dim_A).
Eigen::MatrixXcd eve_reduced_path_II(const BipartiteState& state, double theta, double delta, int k,
                                     std::optional<int> n_phases = std::nullopt);

struct FixedLo {
    double theta = 0.0;
};
struct RandomLo {};
using LoMode = std::variant<FixedLo, RandomLo>;

/// Eve sends displaced squeezed states, squeezed along the quadrature she expects
/// Alice to measure (theta of FixedLo, 0 otherwise) and displaced along it by
/// d ~ N(0, (1 - e^{-2r})/2). She guesses the bin containing d.
struct AttackScenario {
    double r = 1.5;
    bool displaced = true;
    /// If given, must equal the vacuum-mimicking value (1 - e^{-2r})/2.
    std::optional<double> displacement_variance;
    LoMode lo_mode = FixedLo{};
    double delta = 0.1;
    std::int64_t n_rounds = 1'000'000;

    double calibrated_displacement_variance() const;
    void validate() const;
};

struct Histogram {
    double lo = 0.0, width = 0.0;
    std::vector<std::uint64_t> counts;
    std::uint64_t underflow = 0, overflow = 0;
};

struct AttackReport {
    std::string mode;
    double r = 0.0, delta = 0.0;
    std::int64_t n_rounds = 0;
    double measured_mean = 0.0;
    double measured_variance = 0.0;
    double expected_variance = 0.0;
    /// Same rounds with the displacement removed.
    double displacement_free_variance = 0.0;
    double expected_displacement_free_variance = 0.0;
    double eve_guess_rate = 0.0;
    double expected_eve_guess_rate = 0.0;
    double vacuum_guess_bound = 0.0;
    double mimicry_ks_statistic = 0.0;
    double mimicry_pvalue = 0.0;
    Histogram histogram;

    double guess_ratio() const { return eve_guess_rate / vacuum_guess_bound; }
    std::string to_text() const;
    /// bin_center,count,density,vacuum_density
    std::string histogram_csv(const std::string& title = {}) const;
};

AttackReport run_attack(const AttackScenario& scenario, std::uint64_t seed, unsigned threads = 1);

/// Closed forms used as references for the simulation.
double expected_measured_variance(const AttackScenario& scenario, bool with_displacement);
/// Mean probability that Alice's outcome lands in the bin of Eve's displacement.
double expected_guess_rate(const AttackScenario& scenario);

}  // namespace cvqrng::attacklab
