#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <cstddef>
#include <vector>

namespace cvqrng {

struct QuadratureNode {
    double x;
    double w;
};

/// Full N-point Gauss-Legendre rule mapped onto [a, b].
template <unsigned N>
std::vector<QuadratureNode> gauss_legendre(double a, double b) {
    using rule = boost::math::quadrature::gauss<double, N>;
    const auto& abscissa = rule::abscissa();
    const auto& weights = rule::weights();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    std::vector<QuadratureNode> nodes;
    nodes.reserve(N);
    // Boost stores the non-negative half of a symmetric rule; index 0 is the
    // centre node when N is odd.
    const std::size_t start = (N % 2 == 1) ? 1 : 0;
    if (N % 2 == 1) nodes.push_back({mid, half * weights[0]});
    for (std::size_t i = start; i < abscissa.size(); ++i) {
        nodes.push_back({mid - half * abscissa[i], half * weights[i]});
        nodes.push_back({mid + half * abscissa[i], half * weights[i]});
    }
    return nodes;
}

}  // namespace cvqrng
