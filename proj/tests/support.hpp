#pragma once

// Shared helpers for the test suites. Oracles here are deliberately built
// from scratch (finite differences, dense quadrature) rather than from the
// library's own transforms.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "cylflow/grid.hpp"

namespace cyltest {

using cylflow::CylinderSpec;
using cylflow::Field;
using cylflow::Grid;

inline constexpr double pi = std::numbers::pi;

inline double rel_err(double got, double want, double floor = 1e-300) {
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

inline double max_diff(const Field& a, const Field& b) { return (a.values() - b.values()).cwiseAbs().maxCoeff(); }

/// Random combination of the first few cosine/harmonic modes.
inline Field random_bandlimited(const Grid& g, std::mt19937_64& gen, int m_top = 6, int l_top = 3, double amp = 1.0) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const int lt = g.full() ? l_top : 0;
    std::vector<std::tuple<int, int, double, double>> terms;
    for (int m = 0; m <= m_top; ++m)
        for (int l = 0; l <= lt; ++l) terms.emplace_back(m, l, amp * U(gen), l ? amp * U(gen) : 0.0);
    const double d = g.spec().d;
    return Field::sample(g, [&](double z, double th) {
        double s = 0.0;
        for (const auto& [m, l, a, b] : terms) s += std::cos(m * pi * z / d) * (a * std::cos(l * th) + b * std::sin(l * th));
        return s;
    });
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    if (panels % 2) ++panels;
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// Fourth-order central difference of a scalar function.
inline double fd1(const std::function<double(double)>& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

inline double fd2(const std::function<double(double)>& f, double x, double h) {
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}

} // namespace cyltest
