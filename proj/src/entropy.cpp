#include "cvqrng/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "cvqrng/error.hpp"

namespace cvqrng::entropy {

std::string to_string(BoundBasis basis) {
    switch (basis) {
        case BoundBasis::Vacuum: return "vacuum-bound";
    }
    return "unknown";
}

EntropyBound vacuum_min_entropy(double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidInput("delta must be > 0");
    EntropyBound b;
    b.delta = delta;
    b.p_guess_bound = std::erf(delta / 2.0);
    // -log2(1) is -0; report +0 once erf saturates.
    b.h_min_bits = b.p_guess_bound >= 1.0 ? 0.0 : -std::log2(b.p_guess_bound);
    return b;
}

double delta_for_min_entropy(double h_min_bits) {
    if (!(h_min_bits > 0.0) || !std::isfinite(h_min_bits)) throw InvalidInput("h_min must be > 0");
    const double target = std::exp2(-h_min_bits);
    // erf(delta/2) is increasing; bisect on delta.
    double lo = 0.0, hi = 20.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (std::erf(mid / 2.0) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double small_delta_guessing_probability(double delta) {
    if (!(delta > 0.0 && delta <= 0.2))
        throw InvalidInput("small-delta approximation only valid for delta in (0, 0.2]; use vacuum_min_entropy");
    return delta / std::sqrt(std::numbers::pi);
}

double SdiReport::min_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) m = std::min(m, e.margin);
    return m;
}

namespace {

std::string describe(const states::QuantumStateModel& s) {
    std::ostringstream os;
    if (std::holds_alternative<states::Vacuum>(s)) {
        os << "vacuum";
    } else if (const auto* f = std::get_if<states::Fock>(&s)) {
        os << "fock(" << f->n << ")";
    } else if (const auto* m = std::get_if<states::Mixture>(&s)) {
        os << "mixture(";
        for (std::size_t i = 0; i < m->terms.size(); ++i)
            os << (i ? " " : "") << m->terms[i].probability << ":" << m->terms[i].n;
        os << ")";
    } else if (const auto* t = std::get_if<states::Thermal>(&s)) {
        os << "thermal(" << t->mean_photons << ")";
    } else {
        os << "non-diagonal";
    }
    return os.str();
}

}  // namespace

SdiReport sdi_bound_check(std::span<const states::QuantumStateModel> candidates, double delta) {
    const auto vac = vacuum_min_entropy(delta);
    SdiReport report;
    report.delta = delta;
    report.vacuum_bound = vac.p_guess_bound;
    for (const auto& s : candidates) {
        if (!states::is_fock_diagonal(s))
            throw InvalidInput("sdi_bound_check only accepts Fock-diagonal states");
        SdiEntry e;
        e.state = describe(s);
        e.max_bin_probability = states::max_bin_probability(s, 0.0, delta);
        e.margin = vac.p_guess_bound - e.max_bin_probability;
        if (e.margin < -kSdiTolerance) {
            std::ostringstream os;
            os.precision(17);
            os << "state " << e.state << " beats the vacuum guessing bound at delta=" << delta
               << ": " << e.max_bin_probability << " > " << vac.p_guess_bound;
            throw SecurityModelViolation(os.str());
        }
        report.entries.push_back(std::move(e));
    }
    return report;
}

DiagnosticEstimate diagnostic_histogram_min_entropy(std::span<const std::int16_t> codes) {
    if (codes.empty()) throw InvalidInput("no samples");
    std::map<std::int16_t, std::size_t> counts;
    for (auto c : codes) ++counts[c];
    std::size_t top = 0;
    for (const auto& [code, n] : counts) top = std::max(top, n);
    DiagnosticEstimate d;
    d.n_samples = codes.size();
    d.max_frequency = static_cast<double>(top) / static_cast<double>(codes.size());
    d.h_min_bits = d.max_frequency >= 1.0 ? 0.0 : -std::log2(d.max_frequency);
    return d;
}

double output_bit_rate(double pulse_rate, double bits_per_sample) {
    if (!(pulse_rate > 0.0) || !(bits_per_sample >= 0.0)) throw InvalidInput("rate inputs must be non-negative");
    return pulse_rate * bits_per_sample;
}

}  // namespace cvqrng::entropy
