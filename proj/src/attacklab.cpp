#include "cvqrng/attacklab.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <thread>

#include "cvqrng/error.hpp"
#include "cvqrng/quadrature.hpp"
#include "cvqrng/rng.hpp"
#include "cvqrng/states.hpp"
#include "cvqrng/stats.hpp"

namespace cvqrng::attacklab {

using cd = std::complex<double>;

void BipartiteState::validate() const {
    if (dim_E < 1 || dim_A < 1) throw InvalidInput("bipartite dimensions must be >= 1");
    const Eigen::Index d = static_cast<Eigen::Index>(dim_E) * dim_A;
    if (rho.rows() != d || rho.cols() != d) throw InvalidInput("density matrix size does not match dim_E * dim_A");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidInput("density matrix is not Hermitian");
    if (std::abs(rho.trace() - cd(1.0)) > 1e-10) throw InvalidInput("density matrix trace differs from 1");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) throw InvalidInput("density matrix is not positive semidefinite");
}

BipartiteState two_mode_squeezed(double gamma, int dim, TwoModeForm form) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
    if (dim < 1) throw InvalidInput("dim must be >= 1");
    if (std::pow(gamma, 2.0 * dim) > 1e-8) throw InvalidInput("truncation too small for this gamma (gamma^(2 dim) > 1e-8)");
    BipartiteState s;
    s.dim_E = s.dim_A = dim;
    s.rho = Eigen::MatrixXcd::Zero(dim * dim, dim * dim);
    if (form == TwoModeForm::Printed) {
        for (int n = 0; n < dim; ++n)
            for (int m = 0; m < dim; ++m) s.rho(s.index(n, m), s.index(n, m)) = std::pow(gamma, n + m);
    } else {
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim * dim);
        for (int n = 0; n < dim; ++n) psi(s.index(n, n)) = std::pow(gamma, n);
        s.rho = psi * psi.adjoint();
    }
    s.rho /= s.rho.trace();
    return s;
}

BipartiteState product_state(const Eigen::MatrixXcd& rho_E, const Eigen::MatrixXcd& rho_A) {
    BipartiteState s;
    s.dim_E = static_cast<int>(rho_E.rows());
    s.dim_A = static_cast<int>(rho_A.rows());
    s.rho = Eigen::MatrixXcd::Zero(s.dim_E * s.dim_A, s.dim_E * s.dim_A);
    for (int k = 0; k < s.dim_E; ++k)
        for (int l = 0; l < s.dim_E; ++l)
            s.rho.block(k * s.dim_A, l * s.dim_A, s.dim_A, s.dim_A) = rho_E(k, l) * rho_A;
    return s;
}

BipartiteState random_pure_state(int dim_E, int dim_A, std::uint64_t seed) {
    if (dim_E < 1 || dim_A < 1) throw InvalidInput("bipartite dimensions must be >= 1");
    auto rng = RngStream::substream(seed, "random-pure-state", 0);
    Eigen::VectorXcd psi(dim_E * dim_A);
    for (auto& c : psi) c = cd(rng.normal(), rng.normal());
    psi.normalize();
    return {dim_E, dim_A, psi * psi.adjoint()};
}

BipartiteState phase_average_A(const BipartiteState& state) {
    BipartiteState out = state;
    for (int k = 0; k < state.dim_E; ++k)
        for (int l = 0; l < state.dim_E; ++l)
            for (int n = 0; n < state.dim_A; ++n)
                for (int m = 0; m < state.dim_A; ++m)
                    if (n != m) out.rho(state.index(k, n), state.index(l, m)) = 0.0;
    return out;
}

BipartiteState phase_average_A(const BipartiteState& state, int n_phases) {
    if (n_phases < 1) throw InvalidInput("n_phases must be >= 1");
    // U(phi) = I (x) exp(i phi N_A) multiplies element (k n, l m) by exp(i phi (n - m)).
    BipartiteState out = state;
    out.rho.setZero();
    for (int j = 0; j < n_phases; ++j) {
        const double phi = 2.0 * std::numbers::pi * j / n_phases;
        for (int k = 0; k < state.dim_E; ++k)
            for (int l = 0; l < state.dim_E; ++l)
                for (int n = 0; n < state.dim_A; ++n)
                    for (int m = 0; m < state.dim_A; ++m) {
                        const int a = state.index(k, n), b = state.index(l, m);
                        out.rho(a, b) += std::polar(1.0, phi * (n - m)) * state.rho(a, b);
                    }
    }
    out.rho /= static_cast<double>(n_phases);
    return out;
}

Eigen::MatrixXcd partial_trace_A(const BipartiteState& s) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(s.dim_E, s.dim_E);
    for (int k = 0; k < s.dim_E; ++k)
        for (int l = 0; l < s.dim_E; ++l)
            for (int n = 0; n < s.dim_A; ++n) out(k, l) += s.rho(s.index(k, n), s.index(l, n));
    return out;
}

Eigen::MatrixXcd partial_trace_E(const BipartiteState& s) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(s.dim_A, s.dim_A);
    for (int n = 0; n < s.dim_A; ++n)
        for (int m = 0; m < s.dim_A; ++m)
            for (int k = 0; k < s.dim_E; ++k) out(n, m) += s.rho(s.index(k, n), s.index(k, m));
    return out;
}

Eigen::MatrixXcd partial_transpose_A(const BipartiteState& s) {
    Eigen::MatrixXcd out(s.rho.rows(), s.rho.cols());
    for (int k = 0; k < s.dim_E; ++k)
        for (int l = 0; l < s.dim_E; ++l)
            for (int n = 0; n < s.dim_A; ++n)
                for (int m = 0; m < s.dim_A; ++m) out(s.index(k, n), s.index(l, m)) = s.rho(s.index(k, m), s.index(l, n));
    return out;
}

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidInput("trace distance of mismatched matrices");
    const Eigen::MatrixXcd diff = a - b;
    const Eigen::MatrixXcd herm = 0.5 * (diff + diff.adjoint());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

Eigen::MatrixXcd bin_projector(int dim, double theta, double delta, int k) {
    if (dim < 1) throw InvalidInput("dim must be >= 1");
    if (!(delta > 0.0)) throw InvalidInput("delta must be > 0");
    const double lo = k * delta - delta / 2, hi = k * delta + delta / 2;
    const double support = states::search_radius(static_cast<unsigned>(dim - 1));
    if (std::abs(k * delta) > support) throw InvalidInput("bin lies outside the supported quadrature window");
    Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<double> psi;
    for (const auto& node : gauss_legendre<200>(lo, hi)) {
        states::fock_wavefunctions(static_cast<unsigned>(dim - 1), node.x, psi);
        for (int m = 0; m < dim; ++m)
            for (int n = 0; n <= m; ++n) overlap(m, n) += node.w * psi[m] * psi[n];
    }
    Eigen::MatrixXcd q(dim, dim);
    for (int m = 0; m < dim; ++m)
        for (int n = 0; n < dim; ++n)
            q(m, n) = std::polar(1.0, theta * (m - n)) * (m >= n ? overlap(m, n) : overlap(n, m));
    return q;
}

Eigen::MatrixXcd conditional_eve_state(const BipartiteState& s, const Eigen::MatrixXcd& q) {
    if (q.rows() != s.dim_A || q.cols() != s.dim_A) throw InvalidInput("projector dimension does not match dim_A");
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(s.dim_E, s.dim_E);
    for (int k = 0; k < s.dim_E; ++k)
        for (int l = 0; l < s.dim_E; ++l) {
            cd acc = 0.0;
            for (int m = 0; m < s.dim_A; ++m)
                for (int n = 0; n < s.dim_A; ++n) acc += q(m, n) * s.rho(s.index(k, n), s.index(l, m));
            out(k, l) = acc;
        }
    return out;
}

Eigen::MatrixXcd eve_reduced_path_I(const BipartiteState& state, double theta, double delta, int k) {
    state.validate();
    return conditional_eve_state(phase_average_A(state), bin_projector(state.dim_A, theta, delta, k));
}

Eigen::MatrixXcd eve_reduced_path_II(const BipartiteState& state, double theta, double delta, int k,
                                     std::optional<int> n_phases) {
    state.validate();
    const int m_phases = n_phases.value_or(4 * state.dim_A);
    if (m_phases < 1) throw InvalidInput("n_phases must be >= 1");
    // Q_{theta+phi} differs from Q_theta only by the phases e^{i phi (m-n)}; build the
    // unphased overlaps once.
    const Eigen::MatrixXcd base = bin_projector(state.dim_A, theta, delta, k);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(state.dim_E, state.dim_E);
    Eigen::MatrixXcd shifted(state.dim_A, state.dim_A);
    for (int j = 0; j < m_phases; ++j) {
        const double phi = 2.0 * std::numbers::pi * j / m_phases;
        for (int m = 0; m < state.dim_A; ++m)
            for (int n = 0; n < state.dim_A; ++n) shifted(m, n) = std::polar(1.0, phi * (m - n)) * base(m, n);
        acc += conditional_eve_state(state, shifted);
    }
    return acc / static_cast<double>(m_phases);
}

// ---- Monte Carlo attack ---------------------------------------------------------

double AttackScenario::calibrated_displacement_variance() const {
    return displaced ? (1.0 - std::exp(-2.0 * r)) / 2.0 : 0.0;
}

void AttackScenario::validate() const {
    if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidInput("squeezing r must be >= 0");
    if (!(delta > 0.0)) throw InvalidInput("delta must be > 0");
    if (n_rounds < 10'000) throw InvalidInput("attack simulation needs at least 1e4 rounds");
    if (displacement_variance &&
        std::abs(*displacement_variance - calibrated_displacement_variance()) > 1e-9)
        throw InvalidInput("displacement variance does not make the fixed-LO marginal match the vacuum");
}

namespace {

inline std::int64_t bin_of(double q, double delta) {
    // Bins are (k delta - delta/2, k delta + delta/2].
    return static_cast<std::int64_t>(std::ceil(q / delta - 0.5));
}

inline double quad_variance(double r, double theta_rel) {
    const double c = std::cos(theta_rel), s = std::sin(theta_rel);
    return 0.5 * (std::exp(-2.0 * r) * c * c + std::exp(2.0 * r) * s * s);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

bool fixed_mode(const AttackScenario& s) { return std::holds_alternative<FixedLo>(s.lo_mode); }

}  // namespace

double expected_measured_variance(const AttackScenario& s, bool with_displacement) {
    const double disp = with_displacement ? s.calibrated_displacement_variance() : 0.0;
    if (fixed_mode(s)) return std::exp(-2.0 * s.r) / 2.0 + disp;
    // Average over a uniform phase: <cos^2> = <sin^2> = 1/2.
    return std::cosh(2.0 * s.r) / 2.0 + disp / 2.0;
}

double expected_guess_rate(const AttackScenario& s) {
    const double sd_d = std::sqrt(s.calibrated_displacement_variance());
    // Relative phases to average over: one for a fixed LO, a quadrature rule on [0, pi/2] otherwise
    // (the integrand depends on theta only through cos^2 and the sign of cos, and d is symmetric).
    std::vector<QuadratureNode> phases;
    if (fixed_mode(s)) {
        phases.push_back({0.0, 1.0});
    } else {
        const int panels = 16;
        for (int p = 0; p < panels; ++p) {
            const double a = p * (std::numbers::pi / 2) / panels, b = (p + 1) * (std::numbers::pi / 2) / panels;
            for (auto node : gauss_legendre<20>(a, b)) {
                node.w /= std::numbers::pi / 2;
                phases.push_back(node);
            }
        }
    }
    double total = 0.0;
    for (const auto& ph : phases) {
        const double c = std::cos(ph.x);
        const double sd_q = std::sqrt(quad_variance(s.r, ph.x));
        auto hit = [&](double d) {
            const auto k = bin_of(d, s.delta);
            const double lo = (k - 0.5) * s.delta, hi = (k + 0.5) * s.delta;
            return normal_cdf((hi - d * c) / sd_q) - normal_cdf((lo - d * c) / sd_q);
        };
        double value = 0.0;
        if (sd_d == 0.0) {
            value = hit(0.0);
        } else {
            // Integrate bin by bin so the guessed bin is constant on every panel.
            const auto kmax = static_cast<std::int64_t>(std::ceil(9.0 * sd_d / s.delta)) + 1;
            for (std::int64_t k = -kmax; k <= kmax; ++k) {
                const double a = (k - 0.5) * s.delta, b = (k + 0.5) * s.delta;
                for (const auto& node : gauss_legendre<20>(a, b)) {
                    const double z = node.x / sd_d;
                    const double pdf = std::exp(-0.5 * z * z) / (sd_d * std::sqrt(2.0 * std::numbers::pi));
                    value += node.w * pdf * hit(node.x);
                }
            }
        }
        total += ph.w * value;
    }
    return total;
}

AttackReport run_attack(const AttackScenario& s, std::uint64_t seed, unsigned threads) {
    s.validate();
    const bool fixed = fixed_mode(s);
    const double sd_d = std::sqrt(s.calibrated_displacement_variance());
    const double theta_fixed = fixed ? std::get<FixedLo>(s.lo_mode).theta : 0.0;
    // Eve squeezes along the quadrature she expects Alice to read: theta for a fixed LO, 0 otherwise.
    const double squeeze_axis = theta_fixed;

    const std::int64_t chunk = 1 << 16;
    const auto n_chunks = static_cast<std::size_t>((s.n_rounds + chunk - 1) / chunk);
    std::vector<double> outcomes(static_cast<std::size_t>(s.n_rounds));
    struct Partial {
        double sum = 0, sum_sq = 0, free_sum = 0, free_sq = 0;
        std::int64_t hits = 0;
    };
    std::vector<Partial> partials(n_chunks);
    auto worker = [&](std::size_t first, std::size_t stride) {
        for (std::size_t c = first; c < n_chunks; c += stride) {
            auto rng = RngStream::substream(seed, "attack", c);
            const std::int64_t begin = static_cast<std::int64_t>(c) * chunk;
            const std::int64_t end = std::min(s.n_rounds, begin + chunk);
            Partial p;
            for (std::int64_t i = begin; i < end; ++i) {
                const double theta = fixed ? theta_fixed : rng.phase();
                const double rel = theta - squeeze_axis;
                const double d = sd_d > 0.0 ? sd_d * rng.normal() : 0.0;
                const double noise = std::sqrt(quad_variance(s.r, rel)) * rng.normal();
                const double q = d * std::cos(rel) + noise;
                outcomes[static_cast<std::size_t>(i)] = q;
                p.sum += q;
                p.sum_sq += q * q;
                p.free_sum += noise;
                p.free_sq += noise * noise;
                p.hits += bin_of(q, s.delta) == bin_of(d, s.delta) ? 1 : 0;
            }
            partials[c] = p;
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_chunks)));
    if (threads == 1) {
        worker(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    }
    Partial total;
    for (const auto& p : partials) {
        total.sum += p.sum;
        total.sum_sq += p.sum_sq;
        total.free_sum += p.free_sum;
        total.free_sq += p.free_sq;
        total.hits += p.hits;
    }
    const auto n = static_cast<double>(s.n_rounds);

    AttackReport rep;
    rep.mode = fixed ? "fixed-lo" : "random-lo";
    rep.r = s.r;
    rep.delta = s.delta;
    rep.n_rounds = s.n_rounds;
    rep.measured_mean = total.sum / n;
    rep.measured_variance = (total.sum_sq - total.sum * total.sum / n) / (n - 1);
    rep.displacement_free_variance = (total.free_sq - total.free_sum * total.free_sum / n) / (n - 1);
    rep.expected_variance = expected_measured_variance(s, s.displaced);
    rep.expected_displacement_free_variance = expected_measured_variance(s, false);
    rep.eve_guess_rate = static_cast<double>(total.hits) / n;
    rep.expected_eve_guess_rate = expected_guess_rate(s);
    rep.vacuum_guess_bound = std::erf(s.delta / 2.0);
    const auto ks = stats::ks_test_normal(outcomes, 0.0, std::sqrt(0.5));
    rep.mimicry_ks_statistic = ks.statistic;
    rep.mimicry_pvalue = ks.pvalue;

    auto& h = rep.histogram;
    const int bins = 120;
    const double half_range = 6.0 * std::sqrt(std::max(rep.expected_variance, 0.5));
    h.lo = -half_range;
    h.width = 2.0 * half_range / bins;
    h.counts.assign(bins, 0);
    for (double q : outcomes) {
        const double pos = (q - h.lo) / h.width;
        if (pos < 0) ++h.underflow;
        else if (pos >= bins) ++h.overflow;
        else ++h.counts[static_cast<std::size_t>(pos)];
    }
    return rep;
}

std::string AttackReport::to_text() const {
    std::ostringstream os;
    os.precision(10);
    os << "mode: " << mode << '\n'
       << "squeezing_r: " << r << '\n'
       << "delta: " << delta << '\n'
       << "rounds: " << n_rounds << '\n'
       << "measured_mean: " << measured_mean << '\n'
       << "measured_variance: " << measured_variance << '\n'
       << "expected_variance: " << expected_variance << '\n'
       << "displacement_free_variance: " << displacement_free_variance << '\n'
       << "expected_displacement_free_variance: " << expected_displacement_free_variance << '\n'
       << "eve_guess_rate: " << eve_guess_rate << '\n'
       << "expected_eve_guess_rate: " << expected_eve_guess_rate << '\n'
       << "vacuum_guess_bound: " << vacuum_guess_bound << '\n'
       << "guess_ratio: " << guess_ratio() << '\n'
       << "mimicry_ks_statistic: " << mimicry_ks_statistic << '\n'
       << "mimicry_pvalue: " << mimicry_pvalue << '\n';
    return os.str();
}

std::string AttackReport::histogram_csv(const std::string& title) const {
    std::ostringstream os;
    os.precision(10);
    if (!title.empty()) os << "# " << title << '\n';
    os << "# mode=" << mode << " r=" << r << " rounds=" << n_rounds << " underflow=" << histogram.underflow
       << " overflow=" << histogram.overflow << '\n';
    os << "bin_center,count,density,vacuum_density\n";
    const double n = static_cast<double>(n_rounds);
    for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
        const double centre = histogram.lo + (static_cast<double>(i) + 0.5) * histogram.width;
        const double vac = std::exp(-centre * centre) / std::sqrt(std::numbers::pi);
        os << centre << ',' << histogram.counts[i] << ',' << histogram.counts[i] / (n * histogram.width) << ','
           << vac << '\n';
    }
    return os.str();
}

}  // namespace cvqrng::attacklab
