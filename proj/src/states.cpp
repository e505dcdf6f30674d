#include "cvqrng/states.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cvqrng/error.hpp"
#include "cvqrng/quadrature.hpp"

namespace cvqrng::states {
namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInvSqrtPi = 0.56418958354775628695;  // 1/sqrt(pi)
constexpr double kPiQuarter = 0.75112554446494248286;  // pi^{-1/4}

// Probability that N(mean, variance) falls in (lo, hi], evaluated on the
// erfc side that avoids cancellation.
double gaussian_interval(double mean, double variance, double lo, double hi) {
    const double scale = std::sqrt(2.0 * variance);
    const double a = (lo - mean) / scale;
    const double b = (hi - mean) / scale;
    if (a >= 0.0) return 0.5 * (std::erfc(a) - std::erfc(b));
    if (b <= 0.0) return 0.5 * (std::erfc(-b) - std::erfc(-a));
    return 0.5 * (std::erf(b) - std::erf(a));
}

std::vector<FockTerm> fock_terms(const QuantumStateModel& state) {
    if (const auto* f = std::get_if<Fock>(&state)) return {{1.0, f->n}};
    if (std::holds_alternative<Vacuum>(state)) return {{1.0, 0}};
    if (const auto* m = std::get_if<Mixture>(&state)) return m->terms;
    throw InvalidInput("state is not Fock-diagonal");
}

// Integral of sum_n p_n psi_n(q)^2 over (lo, hi]. Composite Gauss-Legendre with
// panels no wider than 0.25 vacuum units.
double fock_diagonal_integral(const std::vector<FockTerm>& terms, unsigned n_max, double lo,
                              double hi) {
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.25)));
    const double width = (hi - lo) / panels;
    std::vector<double> psi;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = lo + p * width;
        for (const auto& node : gauss_legendre<24>(a, a + width)) {
            fock_wavefunctions(n_max, node.x, psi);
            double density = 0.0;
            for (const auto& t : terms) density += t.probability * psi[t.n] * psi[t.n];
            total += node.w * density;
        }
    }
    return total;
}

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + " must be finite");
}

}  // namespace

void validate(const QuantumStateModel& state) {
    std::visit(overloaded{
                   [](const Vacuum&) {},
                   [](const Fock& f) {
                       if (f.n > kMaxFockIndex) throw InvalidInput("Fock index too large");
                   },
                   [](const DisplacedSqueezed& s) {
                       require_finite(s.r, "squeezing parameter");
                       require_finite(s.squeeze_angle, "squeeze angle");
                       require_finite(s.displacement.real(), "displacement");
                       require_finite(s.displacement.imag(), "displacement");
                       if (std::abs(s.r) > 20.0) throw InvalidInput("|r| > 20 is not representable");
                   },
                   [](const Thermal& t) {
                       require_finite(t.mean_photons, "mean photon number");
                       if (t.mean_photons < 0.0) throw InvalidInput("mean photon number < 0");
                   },
                   [](const Mixture& m) {
                       if (m.terms.empty()) throw InvalidInput("empty mixture");
                       double sum = 0.0;
                       for (const auto& t : m.terms) {
                           require_finite(t.probability, "mixture probability");
                           if (t.probability < 0.0) throw InvalidInput("negative mixture probability");
                           if (t.n > kMaxFockIndex) throw InvalidInput("Fock index too large");
                           sum += t.probability;
                       }
                       if (std::abs(sum - 1.0) > 1e-12)
                           throw InvalidInput("mixture probabilities must sum to 1");
                   },
               },
               state);
}

double reduce_phase(double theta) {
    require_finite(theta, "phase");
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(theta, two_pi);
    if (r < 0.0) r += two_pi;
    if (r >= two_pi) r = 0.0;
    return r;
}

QuadratureQuery QuadratureQuery::make(double theta, double q) {
    require_finite(q, "quadrature value");
    return {reduce_phase(theta), q};
}

void fock_wavefunctions(unsigned n_max, double q, std::vector<double>& out) {
    out.resize(n_max + 1);
    out[0] = kPiQuarter * std::exp(-0.5 * q * q);
    if (n_max == 0) return;
    out[1] = std::numbers::sqrt2 * q * out[0];
    for (unsigned n = 1; n < n_max; ++n) {
        out[n + 1] = std::sqrt(2.0 / (n + 1)) * q * out[n] -
                     std::sqrt(static_cast<double>(n) / (n + 1)) * out[n - 1];
    }
}

std::vector<double> fock_wavefunctions(unsigned n_max, double q) {
    std::vector<double> out;
    fock_wavefunctions(n_max, q, out);
    return out;
}

double fock_wavefunction(unsigned n, double q) {
    return fock_wavefunctions(n, q).back();
}

bool is_gaussian(const QuantumStateModel& state) {
    return std::holds_alternative<Vacuum>(state) ||
           std::holds_alternative<DisplacedSqueezed>(state) ||
           std::holds_alternative<Thermal>(state);
}

bool is_fock_diagonal(const QuantumStateModel& state) {
    return std::holds_alternative<Vacuum>(state) || std::holds_alternative<Fock>(state) ||
           std::holds_alternative<Thermal>(state) || std::holds_alternative<Mixture>(state);
}

GaussianMoments gaussian_moments(const QuantumStateModel& state, double theta) {
    return std::visit(
        overloaded{
            [](const Vacuum&) { return GaussianMoments{0.0, 0.5}; },
            [theta](const DisplacedSqueezed& s) {
                const double rel = theta - s.squeeze_angle;
                const double c = std::cos(rel);
                const double sn = std::sin(rel);
                const double var =
                    0.5 * (std::exp(-2.0 * s.r) * c * c + std::exp(2.0 * s.r) * sn * sn);
                const double mean = std::numbers::sqrt2 * (s.displacement.real() * std::cos(theta) +
                                                           s.displacement.imag() * std::sin(theta));
                return GaussianMoments{mean, var};
            },
            [](const Thermal& t) { return GaussianMoments{0.0, t.mean_photons + 0.5}; },
            [](const auto&) -> GaussianMoments {
                throw InvalidInput("state is not in the Gaussian family");
            },
        },
        state);
}

Mixture to_fock_mixture(const Thermal& thermal, unsigned dim) {
    if (dim == 0) throw InvalidInput("truncation dimension must be positive");
    const double nbar = thermal.mean_photons;
    const double ratio = nbar / (1.0 + nbar);
    Mixture m;
    double weight = 1.0;
    double sum = 0.0;
    for (unsigned n = 0; n < dim; ++n) {
        m.terms.push_back({weight, n});
        sum += weight;
        weight *= ratio;
    }
    for (auto& t : m.terms) t.probability /= sum;
    return m;
}

unsigned max_fock_index(const QuantumStateModel& state) {
    return std::visit(overloaded{
                          [](const Fock& f) { return f.n; },
                          [](const Mixture& m) {
                              unsigned n = 0;
                              for (const auto& t : m.terms) n = std::max(n, t.n);
                              return n;
                          },
                          [](const auto&) { return 0u; },
                      },
                      state);
}

double search_radius(unsigned n) {
    return 8.0 + 4.0 * std::sqrt(static_cast<double>(n) + 1.0);
}

double quadrature_pdf(const QuantumStateModel& state, double theta, double q) {
    validate(state);
    require_finite(q, "quadrature value");
    theta = reduce_phase(theta);
    if (std::holds_alternative<Vacuum>(state)) return kInvSqrtPi * std::exp(-q * q);
    if (is_gaussian(state)) {
        const auto g = gaussian_moments(state, theta);
        const double d = q - g.mean;
        return std::exp(-d * d / (2.0 * g.variance)) / std::sqrt(2.0 * std::numbers::pi * g.variance);
    }
    const auto terms = fock_terms(state);
    const auto psi = fock_wavefunctions(max_fock_index(state), q);
    double density = 0.0;
    for (const auto& t : terms) density += t.probability * psi[t.n] * psi[t.n];
    return density;
}

double quadrature_pdf(const QuantumStateModel& state, const QuadratureQuery& query) {
    return quadrature_pdf(state, query.theta, query.q);
}

double bin_probability(const QuantumStateModel& state, double theta, double delta,
                       std::int64_t k) {
    validate(state);
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidInput("bin width must be > 0");
    const double lo = (static_cast<double>(k) - 0.5) * delta;
    const double hi = (static_cast<double>(k) + 0.5) * delta;
    if (is_gaussian(state)) {
        const auto g = gaussian_moments(state, reduce_phase(theta));
        return gaussian_interval(g.mean, g.variance, lo, hi);
    }
    return fock_diagonal_integral(fock_terms(state), max_fock_index(state), lo, hi);
}

double max_bin_probability(const QuantumStateModel& state, double theta, double delta) {
    validate(state);
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidInput("bin width must be > 0");
    if (std::holds_alternative<Vacuum>(state)) return std::erf(0.5 * delta);

    if (is_gaussian(state)) {
        // Equal-width bins of a unimodal symmetric density peak at the bin nearest the mean.
        const auto g = gaussian_moments(state, reduce_phase(theta));
        const auto centre = static_cast<std::int64_t>(std::llround(g.mean / delta));
        double best = 0.0;
        for (std::int64_t k = centre - 2; k <= centre + 2; ++k) {
            const double lo = (static_cast<double>(k) - 0.5) * delta;
            best = std::max(best, gaussian_interval(g.mean, g.variance, lo, lo + delta));
        }
        return best;
    }

    const auto terms = fock_terms(state);
    const unsigned n_max = max_fock_index(state);
    const auto half_bins = static_cast<std::int64_t>(std::ceil(search_radius(n_max) / delta));
    double best = 0.0;
    for (std::int64_t k = -half_bins; k <= half_bins; ++k) {
        const double lo = (static_cast<double>(k) - 0.5) * delta;
        best = std::max(best, fock_diagonal_integral(terms, n_max, lo, lo + delta));
    }
    return best;
}

QuadratureSampler::QuadratureSampler(QuantumStateModel state) : state_(std::move(state)) {
    validate(state_);
    if (const auto* m = std::get_if<Mixture>(&state_)) {
        double acc = 0.0;
        for (const auto& t : m->terms) {
            acc += t.probability;
            mixture_cumulative_.push_back(acc);
        }
    }
}

const QuadratureSampler::InverseCdf& QuadratureSampler::table(unsigned n) {
    auto it = tables_.find(n);
    if (it != tables_.end()) return it->second;

    InverseCdf t;
    const double radius = search_radius(n);
    t.cell = 1.0 / 512.0;
    const auto cells = static_cast<std::size_t>(std::ceil(2.0 * radius / t.cell));
    t.lo = -0.5 * static_cast<double>(cells) * t.cell;
    t.cdf.resize(cells + 1);
    t.cdf[0] = 0.0;
    std::vector<double> psi;
    for (std::size_t i = 0; i < cells; ++i) {
        const double a = t.lo + static_cast<double>(i) * t.cell;
        double mass = 0.0;
        for (const auto& node : gauss_legendre<8>(a, a + t.cell)) {
            fock_wavefunctions(n, node.x, psi);
            mass += node.w * psi[n] * psi[n];
        }
        t.cdf[i + 1] = t.cdf[i] + mass;
    }
    const double total = t.cdf.back();
    for (auto& c : t.cdf) c /= total;
    return tables_.emplace(n, std::move(t)).first->second;
}

double QuadratureSampler::sample_fock(unsigned n, RngStream& rng) {
    if (n == 0) return rng.normal(0.0, std::sqrt(0.5));
    const auto& t = table(n);
    const double u = rng.uniform();
    auto it = std::upper_bound(t.cdf.begin(), t.cdf.end(), u);
    std::size_t i = static_cast<std::size_t>(std::distance(t.cdf.begin(), it));
    i = std::clamp<std::size_t>(i, 1, t.cdf.size() - 1) - 1;
    const double width = t.cdf[i + 1] - t.cdf[i];
    const double frac = width > 0.0 ? (u - t.cdf[i]) / width : 0.5;
    return t.lo + (static_cast<double>(i) + frac) * t.cell;
}

double QuadratureSampler::operator()(double theta, RngStream& rng) {
    if (is_gaussian(state_)) {
        const auto g = gaussian_moments(state_, theta);
        return rng.normal(g.mean, std::sqrt(g.variance));
    }
    if (const auto* f = std::get_if<Fock>(&state_)) return sample_fock(f->n, rng);
    const auto& m = std::get<Mixture>(state_);
    const double u = rng.uniform() * mixture_cumulative_.back();
    auto it = std::upper_bound(mixture_cumulative_.begin(), mixture_cumulative_.end(), u);
    const auto idx = std::min<std::size_t>(
        static_cast<std::size_t>(std::distance(mixture_cumulative_.begin(), it)),
        m.terms.size() - 1);
    return sample_fock(m.terms[idx].n, rng);
}

double sample_quadrature(const QuantumStateModel& state, double theta, RngStream& rng) {
    QuadratureSampler sampler(state);
    return sampler(theta, rng);
}

}  // namespace cvqrng::states
