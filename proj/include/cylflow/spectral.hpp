#pragma once

// Analytic spectrum of the linearized flow speed about the reference
// cylinder, its eigenbasis on the grid, and the orthogonal projection onto
// the zero eigenspace.
//
// Eigenpairs: lambda_{l,m} = -(m^2 pi^2 / d^2 + (l(l+n-2) - (n-1)) / R^2)
// with eigenfunctions cos(m pi z / d) Y_{l,p}(q), 1 <= p <= M_l. The
// constant function is the extra kernel member, labelled (l,p,m) = (1,0,0).

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cylflow/grid.hpp"

namespace cylflow {

struct ModeIndex {
    int l = 0;
    int p = 1;
    int m = 0;

    static constexpr ModeIndex constant() { return {1, 0, 0}; }
    bool is_constant() const { return (l == 1 && p == 0 && m == 0) || (l == 0 && m == 0); }
    bool operator==(const ModeIndex&) const = default;
};

struct SpectrumEntry {
    int l = 0;
    int m = 0;
    double lambda = 0.0;
    int multiplicity = 0;
};

inline long long binomial(long long top, long long k) {
    if (k < 0 || top < 0 || top < k) return 0;
    long long r = 1;
    for (long long i = 1; i <= k; ++i) r = r * (top - k + i) / i;
    return r;
}

/// Dimension of the degree-l spherical harmonics on S^{n-1}.
inline int multiplicity(int n, int l) {
    if (n < 2) throw InvalidArgument("multiplicity: n must be >= 2");
    if (l < 0) throw InvalidArgument("multiplicity: l must be >= 0");
    return static_cast<int>(binomial(l + n - 1, n - 1) - binomial(l + n - 3, n - 1));
}

/// lambda_{l,m}. The constant mode (l = m = 0) is in the kernel and returns 0.
inline double eigenvalue(const CylinderSpec& spec, int l, int m) {
    if (l < 0 || m < 0) throw InvalidArgument("eigenvalue: l and m must be >= 0");
    if (l == 0 && m == 0) return 0.0;
    const double n = spec.n;
    const double axial = m * m * std::numbers::pi * std::numbers::pi / (spec.d * spec.d);
    const double angular = (l * (l + n - 2.0) - (n - 1.0)) / (spec.R * spec.R);
    return 0.0 - (axial + angular);
}

inline double critical_radius(int n, double d) {
    if (n < 2) throw InvalidArgument("critical_radius: n must be >= 2");
    if (!(d > 0.0)) throw InvalidArgument("critical_radius: d must be positive");
    return d * std::sqrt(static_cast<double>(n - 1)) / std::numbers::pi;
}

/// Smallest |lambda| over the non-kernel eigenvalues. Scans l, m <= 64;
/// lambda is monotone in m and in l >= 1, so the minimum is attained among
/// (0,1), (1,1), (2,0).
inline double spectral_gap(const CylinderSpec& spec) {
    spec.validate();
    const double rstar = critical_radius(spec.n, spec.d);
    if (!(spec.R > rstar))
        throw NonPositiveGap("spectral_gap: R = " + std::to_string(spec.R) + " does not exceed the critical radius " +
                             std::to_string(rstar));
    double gap = INFINITY;
    for (int l = 0; l <= 64; ++l)
        for (int m = 0; m <= 64; ++m) {
            if ((l == 0 && m == 0) || (l == 1 && m == 0)) continue;
            gap = std::min(gap, -eigenvalue(spec, l, m));
        }
    return gap;
}

/// Table of (l, m, lambda_{l,m}, M_l) for l <= l_max, m <= m_max.
inline std::vector<SpectrumEntry> spectrum(const CylinderSpec& spec, int l_max, int m_max) {
    spec.validate();
    if (l_max < 0 || m_max < 0) throw InvalidArgument("spectrum: l_max and m_max must be >= 0");
    std::vector<SpectrumEntry> out;
    out.reserve(static_cast<size_t>((l_max + 1) * (m_max + 1)));
    for (int l = 0; l <= l_max; ++l)
        for (int m = 0; m <= m_max; ++m) out.push_back({l, m, eigenvalue(spec, l, m), multiplicity(spec.n, l)});
    return out;
}

/// Number of eigenfunctions (counted with multiplicity) with |lambda| <= tol
/// among l <= l_max, m <= m_max.
inline int kernel_dimension(const CylinderSpec& spec, int l_max = 64, int m_max = 64, double tol = 1e-12) {
    int count = 0;
    for (const auto& e : spectrum(spec, l_max, m_max))
        if (std::abs(e.lambda) <= tol) count += e.multiplicity;
    return count;
}

/// Eigenvalue of every coefficient slot (m, angular index) of `grid`.
inline Eigen::MatrixXd linear_symbol(const Grid& grid) {
    Eigen::MatrixXd lam(grid.nz(), grid.ntheta());
    for (int m = 0; m < grid.nz(); ++m)
        for (int a = 0; a < grid.ntheta(); ++a) lam(m, a) = eigenvalue(grid.spec(), grid.angular_order(a), m);
    return lam;
}

/// cos(m pi z / d) times the raw harmonic (1, cos l theta or sin l theta),
/// without normalization.
inline Field raw_mode(const Grid& grid, const ModeIndex& idx) {
    if (idx.l < 0 || idx.m < 0) throw InvalidArgument("mode index: l and m must be >= 0");
    if (idx.is_constant()) return Field::constant(grid, 1.0);
    if (idx.p < 1 || idx.p > multiplicity(grid.spec().n, idx.l))
        throw InvalidArgument("mode index: p out of range for l = " + std::to_string(idx.l));
    if (idx.l >= 1 && !grid.full())
        throw InvalidArgument("mode index: l >= 1 needs a full-mode grid (n = 2)");
    if (idx.m >= grid.nz() || grid.angular_index(idx.l, idx.p) < 0)
        throw InvalidArgument("mode index: mode not representable on this grid");
    const double k = grid.kz(idx.m);
    const int l = idx.l;
    const bool is_sin = idx.p == 2;
    return Field::sample(grid, [&](double z, double th) {
        const double ang = l == 0 ? 1.0 : (is_sin ? std::sin(l * th) : std::cos(l * th));
        return std::cos(k * z) * ang;
    });
}

/// L^2(d mu_0)-normalized eigenfunction v_{l,p,m}.
inline Field eigenfunction(const Grid& grid, const ModeIndex& idx) {
    Field v = raw_mode(grid, idx);
    return v * (1.0 / l2_norm(v));
}

/// Linearization of the flow speed at the reference cylinder:
/// ((n-1)/R^2 + Laplacian) u - (n-1)/R^2 * mean(u).
inline Field apply_linearized(const CylinderSpec& spec, const Field& u) {
    const double c = (spec.n - 1) / (spec.R * spec.R);
    const double mean = quad(u) / quad(Field::constant(u.grid(), 1.0));
    Field out = laplacian_cyl(u) + u * c;
    return out - Field::constant(u.grid(), c * mean);
}

inline Field apply_linearized(const Field& u) { return apply_linearized(u.grid().spec(), u); }

/// Orthonormal basis of the zero eigenspace representable on `grid`, in the
/// order (constant, cos theta, sin theta). Axisymmetric grids carry only the
/// constant.
inline std::vector<Field> kernel_basis(const Grid& grid) {
    std::vector<Field> basis;
    basis.push_back(eigenfunction(grid, ModeIndex::constant()));
    if (grid.full()) {
        basis.push_back(eigenfunction(grid, {1, 1, 0}));
        basis.push_back(eigenfunction(grid, {1, 2, 0}));
    }
    return basis;
}

struct CenterProjection {
    /// Coefficients against the normalized kernel basis, length n + 1.
    /// Slots for modes the grid cannot represent are zero.
    std::vector<double> coords;
    Field projected;
    /// False on axisymmetric grids, where only the constant mode is
    /// available and translations are invisible.
    bool complete = false;
};

inline CenterProjection project_center(const Field& u) {
    const Grid& g = u.grid();
    CenterProjection out;
    out.coords.assign(static_cast<size_t>(g.spec().n + 1), 0.0);
    out.projected = Field::zeros(g);
    const auto basis = kernel_basis(g);
    for (size_t p = 0; p < basis.size(); ++p) {
        out.coords[p] = inner(u, basis[p]);
        out.projected += basis[p] * out.coords[p];
    }
    out.complete = g.full();
    return out;
}

/// (I - P) u.
inline Field stable_part(const Field& u) { return u - project_center(u).projected; }

} // namespace cylflow
