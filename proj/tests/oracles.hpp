#pragma once

// Test-only reference computations. Nothing here calls into the library code
// paths under test.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        unsigned max_depth = 6, double tol = 1e-14) {
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, max_depth, tol, &err);
}

// Asymptotic Kolmogorov distribution with the Stephens small-sample correction.
inline double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double sum = 0.0;
    for (int k = 1; k < 200; ++k) {
        const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

// Sup distance between the empirical CDF of `xs` and `cdf`.
inline double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return d;
}

inline double normal_cdf(double x, double mean, double variance) {
    return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

inline double chi2_pvalue(double chi2, double dof) {
    return boost::math::gamma_q(dof / 2.0, chi2 / 2.0);
}

// Chi-square goodness of fit on `edges` (interior bin edges), with two open tail bins.
inline double chi2_histogram_pvalue(const std::vector<double>& xs, const std::vector<double>& edges,
                                    const std::function<double(double, double)>& bin_mass) {
    const std::size_t bins = edges.size() + 1;
    std::vector<double> observed(bins, 0.0);
    for (double x : xs) {
        const auto idx = std::upper_bound(edges.begin(), edges.end(), x) - edges.begin();
        observed[static_cast<std::size_t>(idx)] += 1.0;
    }
    const double n = static_cast<double>(xs.size());
    const double inf = std::numeric_limits<double>::infinity();
    double chi2 = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = b == 0 ? -inf : edges[b - 1];
        const double hi = b == bins - 1 ? inf : edges[b];
        const double expected = n * bin_mass(lo, hi);
        chi2 += (observed[b] - expected) * (observed[b] - expected) / expected;
    }
    return chi2_pvalue(chi2, static_cast<double>(bins - 1));
}

inline double mean(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double variance(const std::vector<double>& xs) {
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

}  // namespace oracle

namespace oracle {

// Two-sample KS statistic for integer-valued samples (conservative under ties).
template <class Int>
double ks_two_sample_discrete(const std::vector<Int>& a, const std::vector<Int>& b, int lo, int hi) {
    std::vector<double> ca(static_cast<std::size_t>(hi - lo + 1), 0.0), cb(ca.size(), 0.0);
    for (auto x : a) ca[static_cast<std::size_t>(x - lo)] += 1.0;
    for (auto x : b) cb[static_cast<std::size_t>(x - lo)] += 1.0;
    double fa = 0.0, fb = 0.0, d = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) {
        fa += ca[i] / static_cast<double>(a.size());
        fb += cb[i] / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

inline double ks_two_sample_pvalue(double d, std::size_t n1, std::size_t n2) {
    const double ne = static_cast<double>(n1) * static_cast<double>(n2) / static_cast<double>(n1 + n2);
    return ks_pvalue(d, static_cast<std::size_t>(ne));
}

template <class T>
double sample_variance(const std::vector<T>& xs) {
    double m = 0.0;
    for (auto x : xs) m += static_cast<double>(x);
    m /= static_cast<double>(xs.size());
    double s = 0.0;
    for (auto x : xs) s += (static_cast<double>(x) - m) * (static_cast<double>(x) - m);
    return s / static_cast<double>(xs.size() - 1);
}

template <class T>
double sample_mean(const std::vector<T>& xs) {
    double m = 0.0;
    for (auto x : xs) m += static_cast<double>(x);
    return m / static_cast<double>(xs.size());
}

}  // namespace oracle
