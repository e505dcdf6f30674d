#include "doctest_main.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "cvqrng/detector.hpp"
#include "cvqrng/entropy.hpp"
#include "cvqrng/error.hpp"
#include "cvqrng/states.hpp"

using namespace cvqrng;
using entropy::vacuum_min_entropy;

// Golden values: mpmath at 40 digits.
TEST_CASE("vacuum min-entropy golden values") {
    const auto b = vacuum_min_entropy(0.03846);
    CHECK(b.p_guess_bound == doctest::Approx(0.021696057001008923).epsilon(1e-15));
    CHECK(b.h_min_bits == doctest::Approx(5.5264233158594345).epsilon(1e-14));
    CHECK(std::abs(b.h_min_bits - 5.53) < 0.005);
    CHECK(b.basis == entropy::BoundBasis::Vacuum);

    CHECK(vacuum_min_entropy(0.9538725524089397).h_min_bits == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(vacuum_min_entropy(0.1).p_guess_bound == doctest::Approx(0.056371977797016624).epsilon(1e-15));
    CHECK(vacuum_min_entropy(1.0).h_min_bits == doctest::Approx(0.94203027003420216).epsilon(1e-14));
    CHECK(vacuum_min_entropy(2.0).p_guess_bound == doctest::Approx(0.84270079294971487).epsilon(1e-15));

    const auto sat = vacuum_min_entropy(20.0);
    CHECK(sat.h_min_bits == 0.0);
    CHECK_FALSE(std::signbit(sat.h_min_bits));
    CHECK(sat.p_guess_bound == 1.0);
}

TEST_CASE("inverse of the vacuum bound") {
    CHECK(entropy::delta_for_min_entropy(5.53) == doctest::Approx(0.03836474588030487).epsilon(1e-13));
    CHECK(entropy::delta_for_min_entropy(1.0) == doctest::Approx(0.9538725524089397).epsilon(1e-13));
    CHECK_THROWS_AS(entropy::delta_for_min_entropy(0.0), InvalidInput);
}

TEST_CASE("vacuum bound is monotone and self-consistent") {
    double prev = std::numeric_limits<double>::infinity();
    for (double d = 0.001; d < 8.0; d *= 1.1) {
        const auto b = vacuum_min_entropy(d);
        CHECK(b.h_min_bits < prev);
        prev = b.h_min_bits;
        CHECK(std::exp2(-b.h_min_bits) == doctest::Approx(b.p_guess_bound).epsilon(1e-12));
        CHECK(b.p_guess_bound > 0.0);
        CHECK(b.p_guess_bound <= 1.0);
    }
    CHECK_THROWS_AS(vacuum_min_entropy(0.0), InvalidInput);
    CHECK_THROWS_AS(vacuum_min_entropy(-1.0), InvalidInput);
    CHECK_THROWS_AS(vacuum_min_entropy(std::nan("")), InvalidInput);
}

TEST_CASE("small-delta guessing probability") {
    CHECK(entropy::small_delta_guessing_probability(0.1) == doctest::Approx(0.056418958354775628).epsilon(1e-15));
    const double exact = std::erf(0.05);
    CHECK(std::abs(entropy::small_delta_guessing_probability(0.1) - exact) / exact < 1e-3);
    for (double d = 0.005; d <= 0.2; d += 0.005) {
        const double approx = entropy::small_delta_guessing_probability(d);
        CHECK(std::abs(approx - std::erf(d / 2)) / approx < d * d / 12);
    }
    CHECK_THROWS_AS(entropy::small_delta_guessing_probability(0.5), InvalidInput);
    CHECK_THROWS_AS(entropy::small_delta_guessing_probability(0.0), InvalidInput);
}

TEST_CASE("Fock states never beat the vacuum bound") {
    std::vector<states::QuantumStateModel> fock;
    for (unsigned n = 1; n <= 20; ++n) fock.push_back(states::Fock{n});
    const auto report = entropy::sdi_bound_check(fock, 0.1);
    REQUIRE(report.entries.size() == 20);
    CHECK(report.vacuum_bound == std::erf(0.05));
    for (const auto& e : report.entries) CHECK(e.margin > 0.0);
    // Brute-force bin integration (scipy quad) for |1>: max bin 0.041441642950636.
    CHECK(report.entries[0].margin == doctest::Approx(0.056371977797016624 - 0.041441642950636).epsilon(1e-9));
    CHECK(report.entries[0].state == "fock(1)");
}

TEST_CASE("mixtures obey the bound by convexity") {
    const states::Mixture mix{{{0.5, 0}, {0.5, 1}}};
    const std::vector<states::QuantumStateModel> all{states::Vacuum{}, states::Fock{1}, mix};
    const auto r = entropy::sdi_bound_check(all, 0.1);
    CHECK(r.entries[0].margin == 0.0);
    CHECK(r.entries[1].margin > 0.0);
    // Margin of a mixture is at least the weighted margins of its parts.
    CHECK(r.entries[2].margin >= 0.5 * r.entries[0].margin + 0.5 * r.entries[1].margin);
    CHECK(r.entries[2].margin == doctest::Approx(0.022182).epsilon(1e-4));
    CHECK(r.min_margin() == 0.0);
}

TEST_CASE("vacuum margin is exactly zero at any delta") {
    for (double d : {0.001, 0.03846, 0.1, 1.0, 5.0}) {
        const std::vector<states::QuantumStateModel> v{states::Vacuum{}};
        CHECK(entropy::sdi_bound_check(v, d).entries[0].margin == 0.0);
    }
}

TEST_CASE("Fock-diagonal states satisfy the bound across a delta grid") {
    std::vector<states::QuantumStateModel> s;
    for (unsigned n = 0; n <= 12; ++n) s.push_back(states::Fock{n});
    s.push_back(states::Thermal{0.3});
    s.push_back(states::Mixture{{{0.2, 0}, {0.3, 2}, {0.5, 7}}});
    for (double d : {0.02, 0.1, 0.5, 1.0, 2.0}) {
        const auto r = entropy::sdi_bound_check(s, d);
        const double h_vac = vacuum_min_entropy(d).h_min_bits;
        for (const auto& e : r.entries) CHECK(-std::log2(e.max_bin_probability) >= h_vac - 1e-12);
    }
}

TEST_CASE("non-diagonal states are outside the check's scope") {
    const std::vector<states::QuantumStateModel> sq{states::DisplacedSqueezed{1.0, 0.0, {}}};
    CHECK_THROWS_AS(entropy::sdi_bound_check(sq, 0.1), InvalidInput);
}

TEST_CASE("histogram estimate is diagnostic only") {
    detector::MeasurementConfig cfg;
    cfg.conversion_gain = 350;
    cfg.lo_phase = detector::FixedPhase{0.0};
    const auto block = detector::measure_stream(states::Vacuum{}, cfg, 200000, 3);
    const auto d = entropy::diagnostic_histogram_min_entropy(block.codes);
    static_assert(!entropy::DiagnosticEstimate::certified);
    // delta = 1/sqrt(700); estimate should land near the certified value.
    CHECK(d.h_min_bits == doctest::Approx(vacuum_min_entropy(1.0 / std::sqrt(700.0)).h_min_bits).epsilon(0.02));
    std::vector<std::int16_t> constant(10, 4);
    CHECK(entropy::diagnostic_histogram_min_entropy(constant).h_min_bits == 0.0);
}

TEST_CASE("bit rate identity") {
    CHECK(entropy::output_bit_rate(50e6, 5.4) == doctest::Approx(270e6));
}
