#include "doctest_main.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "cvqrng/attacklab.hpp"
#include "cvqrng/error.hpp"
#include "cvqrng/rng.hpp"
#include "cvqrng/states.hpp"
#include "oracles.hpp"

using namespace cvqrng;
using namespace cvqrng::attacklab;

namespace {

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

double min_eigenvalue(const Eigen::MatrixXcd& m) {
    const Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

// Independent bin weight via adaptive Gauss-Kronrod.
double bin_weight(unsigned n, double lo, double hi) {
    return oracle::integrate([n](double q) { const double p = states::fock_wavefunction(n, q); return p * p; }, lo, hi);
}

}  // namespace

TEST_CASE("two-mode squeezed states") {
    const auto vac = two_mode_squeezed(0.0, 4);
    CHECK(std::abs(vac.rho(0, 0) - 1.0) < 1e-15);
    CHECK(vac.rho.cwiseAbs().sum() == doctest::Approx(1.0));
    CHECK(two_mode_squeezed(0.0, 4, TwoModeForm::Correlated).rho.isApprox(vac.rho));

    const auto printed = two_mode_squeezed(0.5, 20);
    CHECK_NOTHROW(printed.validate());
    const auto pa = partial_trace_E(printed);
    // Reference: normalized 0.5^m over m < 20.
    CHECK(pa(0, 0).real() == doctest::Approx(0.500000476837613).epsilon(1e-12));
    CHECK(pa(3, 3).real() == doctest::Approx(0.06250005960470162).epsilon(1e-12));
    for (int m = 1; m < 20; ++m) CHECK(pa(m, m).real() == doctest::Approx(0.5 * pa(m - 1, m - 1).real()).epsilon(1e-12));

    const auto corr = two_mode_squeezed(0.5, 20, TwoModeForm::Correlated);
    CHECK_NOTHROW(corr.validate());
    const auto avg = phase_average_A(corr);
    // Averaged form: (1 - g^2) sum g^{2n} |n n><n n|.
    Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(400, 400);
    for (int n = 0; n < 20; ++n) expected(corr.index(n, n), corr.index(n, n)) = (1 - 0.25) * std::pow(0.25, n);
    expected /= expected.trace();
    CHECK(max_abs(avg.rho - expected) < 1e-14);

    CHECK_THROWS_AS(two_mode_squeezed(1.0, 20), InvalidInput);
    CHECK_THROWS_AS(two_mode_squeezed(0.9, 20), InvalidInput);
}

TEST_CASE("phase averaging: exact, discrete, idempotent, trace preserving") {
    const auto rho = random_pure_state(5, 7, 1);
    const auto exact = phase_average_A(rho);
    CHECK(max_abs(phase_average_A(exact).rho - exact.rho) == 0.0);
    CHECK(std::abs(exact.rho.trace() - rho.rho.trace()) < 1e-12);
    CHECK(max_abs(phase_average_A(rho, 64).rho - exact.rho) < 1e-12);
    CHECK(max_abs(phase_average_A(rho, 7).rho - exact.rho) < 1e-12);
    CHECK(max_abs(phase_average_A(rho, 3).rho - exact.rho) > 1e-3);

    const auto big = random_pure_state(2, 32, 2);
    CHECK(max_abs(phase_average_A(big, 64).rho - phase_average_A(big).rho) < 1e-12);

    const auto diag = two_mode_squeezed(0.3, 16);
    CHECK(max_abs(phase_average_A(diag).rho - diag.rho) == 0.0);
}

TEST_CASE("phase-averaged two-mode squeezed state is PPT") {
    const auto avg = phase_average_A(two_mode_squeezed(0.6, 24, TwoModeForm::Correlated));
    CHECK(min_eigenvalue(partial_transpose_A(avg)) > -1e-12);
    // The unaveraged correlated state is entangled: its partial transpose has a negative eigenvalue.
    CHECK(min_eigenvalue(partial_transpose_A(two_mode_squeezed(0.6, 24, TwoModeForm::Correlated))) < -0.1);
    for (int k = 0; k < 24; ++k)
        for (int n = 0; n < 24; ++n)
            for (int m = 0; m < 24; ++m)
                if (n != m) CHECK_UNARY(avg.rho(avg.index(k, n), avg.index(k, m)) == std::complex<double>(0.0));
}

TEST_CASE("bin projector weights match adaptive quadrature") {
    const auto q = bin_projector(8, 0.7, 0.5, 1);
    CHECK((q - q.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
    for (unsigned n = 0; n < 8; ++n) CHECK(q(n, n).real() == doctest::Approx(bin_weight(n, 0.25, 0.75)).epsilon(1e-12));
    CHECK(q(0, 0).real() == doctest::Approx(states::bin_probability(states::Vacuum{}, 0.0, 0.5, 1)).epsilon(1e-12));
    // Summing over all bins gives the identity.
    Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(6, 6);
    for (int k = -34; k <= 34; ++k) total += bin_projector(6, 0.3, 0.5, k);
    CHECK(max_abs(total - Eigen::MatrixXcd::Identity(6, 6)) < 1e-12);
    CHECK_THROWS_AS(bin_projector(4, 0.0, 0.5, 1000), InvalidInput);
}

TEST_CASE("Eve's state is the same along both orderings") {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        auto rng = RngStream::substream(77, "dims", static_cast<std::uint64_t>(t));
        const int de = 1 + static_cast<int>(rng.uniform() * 8);
        const int da = 1 + static_cast<int>(rng.uniform() * 8);
        const auto s = random_pure_state(de, da, static_cast<std::uint64_t>(1000 + t));
        const double theta = rng.phase();
        for (double delta : {0.1, 0.5, 1.0})
            for (int k : {-1, 0, 2}) {
                const auto a = eve_reduced_path_I(s, theta, delta, k);
                const auto b = eve_reduced_path_II(s, theta, delta, k);
                worst = std::max(worst, trace_distance(a, b));
            }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("Eve's state equals the weighted diagonal sum") {
    const auto s = random_pure_state(6, 6, 5);
    const double delta = 0.5;
    const int k = 0;
    Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(6, 6);
    for (int n = 0; n < 6; ++n) {
        const double w = bin_weight(static_cast<unsigned>(n), -0.25, 0.25);
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) expected(a, b) += w * s.rho(s.index(a, n), s.index(b, n));
    }
    CHECK(trace_distance(eve_reduced_path_I(s, 1.1, delta, k), expected) < 1e-12);
    CHECK(trace_distance(eve_reduced_path_II(s, 1.1, delta, k), expected) < 1e-12);
}

TEST_CASE("uncorrelated and phase-averaged inputs") {
    Eigen::MatrixXcd e0 = Eigen::MatrixXcd::Zero(3, 3), a0 = Eigen::MatrixXcd::Zero(3, 3);
    e0(0, 0) = 1;
    a0(0, 0) = 1;
    const auto prod = product_state(e0, a0);
    for (double theta : {0.0, 0.9, 2.5}) {
        const auto eve = eve_reduced_path_I(prod, theta, 0.5, 0);
        CHECK(std::abs(eve(0, 0) - std::erf(0.25)) < 1e-12);
        CHECK(eve.cwiseAbs().sum() == doctest::Approx(std::erf(0.25)).epsilon(1e-12));
    }
    const auto avg = phase_average_A(two_mode_squeezed(0.4, 14, TwoModeForm::Correlated));
    const auto eve = eve_reduced_path_II(avg, 0.3, 0.2, 1);
    Eigen::MatrixXcd off = eve;
    off.diagonal().setZero();
    CHECK(max_abs(off) < 1e-15);
}

TEST_CASE("fixed-LO attack mimics the vacuum while Eve guesses well") {
    AttackScenario sc;
    sc.r = 1.5;
    sc.lo_mode = FixedLo{0.0};
    sc.delta = 0.1;
    sc.n_rounds = 1'000'000;
    const auto rep = run_attack(sc, 21);
    CHECK(rep.measured_variance == doctest::Approx(0.5).epsilon(0.01));
    CHECK(rep.mimicry_pvalue > 0.001);
    // Reference guess rate from scipy bin-by-bin quadrature.
    CHECK(rep.expected_eve_guess_rate == doctest::Approx(0.244715975739688).epsilon(1e-9));
    CHECK(rep.eve_guess_rate == doctest::Approx(rep.expected_eve_guess_rate).epsilon(0.01));
    CHECK(rep.eve_guess_rate > 4 * rep.vacuum_guess_bound);
    CHECK(rep.displacement_free_variance == doctest::Approx(std::exp(-3.0) / 2).epsilon(0.01));
    CHECK(rep.to_text().find("mode: fixed-lo\n") != std::string::npos);
    const auto csv = rep.histogram_csv("fig1");
    CHECK(csv.rfind("# fig1\n", 0) == 0);
    CHECK(csv.find("bin_center,count,density,vacuum_density\n") != std::string::npos);

    AttackScenario other = sc;
    other.r = 0.5;
    other.delta = 0.3;
    CHECK(expected_guess_rate(other) == doctest::Approx(0.26821236578186).epsilon(1e-9));
}

TEST_CASE("randomized LO exposes the squeezing") {
    AttackScenario sc;
    sc.r = 1.5;
    sc.lo_mode = RandomLo{};
    sc.delta = 0.1;
    sc.n_rounds = 1'000'000;
    const auto rep = run_attack(sc, 22);
    CHECK(rep.displacement_free_variance == doctest::Approx(std::cosh(3.0) / 2).epsilon(0.02));
    CHECK(rep.measured_variance == doctest::Approx(std::cosh(3.0) / 2 + (1 - std::exp(-3.0)) / 4).epsilon(0.02));
    CHECK(rep.expected_variance == doctest::Approx(5.271384230796917).epsilon(1e-12));
    CHECK(rep.measured_variance > 0.5);
    CHECK(rep.mimicry_pvalue < 1e-6);
    CHECK(rep.expected_eve_guess_rate == doctest::Approx(0.03481456267193238).epsilon(1e-7));
    CHECK(rep.eve_guess_rate == doctest::Approx(rep.expected_eve_guess_rate).epsilon(0.03));
    CHECK(rep.eve_guess_rate < rep.vacuum_guess_bound);
}

TEST_CASE("randomized-LO variance grows with squeezing") {
    AttackScenario sc;
    sc.lo_mode = RandomLo{};
    sc.displaced = false;
    double prev = 0.5;
    for (double r : {0.05, 0.2, 0.7, 1.5, 2.5}) {
        sc.r = r;
        const double v = expected_measured_variance(sc, false);
        CHECK(v > prev);
        prev = v;
    }
    sc.r = 0.0;
    CHECK(expected_measured_variance(sc, false) == 0.5);
}

TEST_CASE("no squeezing means no advantage") {
    for (LoMode mode : {LoMode{FixedLo{0.4}}, LoMode{RandomLo{}}}) {
        AttackScenario sc;
        sc.r = 0.0;
        sc.lo_mode = mode;
        sc.delta = 0.1;
        sc.n_rounds = 200'000;
        const auto rep = run_attack(sc, 3);
        CHECK(rep.expected_eve_guess_rate == doctest::Approx(std::erf(0.05)).epsilon(1e-12));
        CHECK(rep.measured_variance == doctest::Approx(0.5).epsilon(0.01));
        CHECK(rep.mimicry_pvalue > 0.001);
    }
}

TEST_CASE("attack scenario validation and thread independence") {
    AttackScenario sc;
    sc.displacement_variance = 0.3;
    CHECK_THROWS_AS(run_attack(sc, 1), InvalidInput);
    sc.displacement_variance = (1 - std::exp(-3.0)) / 2;
    sc.n_rounds = 1000;
    CHECK_THROWS_AS(run_attack(sc, 1), InvalidInput);
    sc.n_rounds = 150'000;
    CHECK(run_attack(sc, 9, 1).to_text() == run_attack(sc, 9, 3).to_text());
}
