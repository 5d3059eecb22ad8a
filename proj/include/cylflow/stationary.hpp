#pragma once

// Equilibria of the flow near the reference cylinder.
//
// Cylinders: radius R + y0 with axis through (y1, ..., yn, 0). Over the
// direction q/R the radial graph is
//   rho(y) = s - R + sqrt(s^2 + (R + y0)^2 - |y'|^2),   s = sum_k y_k q_k / R,
// with y' = (y1, ..., yn). Translations are representable only on full
// (n = 2) grids; axisymmetric grids carry y0 alone.
//
// Axisymmetric CMC profiles r(z) are found by Newton on (r_0..r_{N-1}, h)
// with one extra constraint row (fixed volume or fixed cos(pi z / d)
// coefficient).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cylflow/geometry.hpp"
#include "cylflow/grid.hpp"
#include "cylflow/spectral.hpp"

namespace cylflow {

struct CylinderParams {
    /// y0 = radius offset, then the axis intersection (y1, ..., yn).
    std::vector<double> y;
};

namespace detail {

inline void check_params(const Grid& grid, const std::vector<double>& y) {
    const int n = grid.spec().n;
    if (static_cast<int>(y.size()) != n + 1)
        throw InvalidArgument("cylinder parameters: expected n+1 = " + std::to_string(n + 1) + " entries");
    for (double v : y)
        if (!std::isfinite(v)) throw InvalidArgument("cylinder parameters: non-finite entry");
    if (!grid.full())
        for (int k = 1; k <= n; ++k)
            if (y[k] != 0.0) throw InvalidArgument("cylinder translations need a full-mode grid (n = 2)");
}

// s(theta) = y1 cos theta + y2 sin theta (zero on axisymmetric grids).
inline double axis_projection(const Grid& grid, const std::vector<double>& y, double th) {
    return grid.full() ? y[1] * std::cos(th) + y[2] * std::sin(th) : 0.0;
}

inline void check_chart(const Grid& grid, const std::vector<double>& y) {
    const double Rp = grid.spec().R + y[0];
    double shift2 = 0.0;
    for (size_t k = 1; k < y.size(); ++k) shift2 += y[k] * y[k];
    if (!(Rp > 0.0) || !(std::sqrt(shift2) < Rp))
        throw OutsideChart("cylinder parameters outside the chart: need R + y0 > |(y1..yn)|");
}

} // namespace detail

/// Height function of the cylinder with parameters y.
inline Field cylinder_graph(const CylinderParams& params, const Grid& grid) {
    const auto& y = params.y;
    detail::check_params(grid, y);
    detail::check_chart(grid, y);
    const double R = grid.spec().R;
    const double Rp2 = (R + y[0]) * (R + y[0]);
    double shift2 = 0.0;
    for (size_t k = 1; k < y.size(); ++k) shift2 += y[k] * y[k];
    return Field::sample(grid, [&](double, double th) {
        const double s = detail::axis_projection(grid, y, th);
        const double rad = s * s + Rp2 - shift2;
        if (!(rad > 0.0)) throw OutsideChart("cylinder_graph: negative radicand");
        return s - R + std::sqrt(rad);
    });
}

/// d rho(y) / d y_k for each k = 0..n.
inline std::vector<Field> cylinder_graph_jacobian(const CylinderParams& params, const Grid& grid) {
    const auto& y = params.y;
    detail::check_params(grid, y);
    detail::check_chart(grid, y);
    const double R = grid.spec().R;
    const double Rp = R + y[0];
    double shift2 = 0.0;
    for (size_t k = 1; k < y.size(); ++k) shift2 += y[k] * y[k];
    const auto root = [&](double th) {
        const double s = detail::axis_projection(grid, y, th);
        return std::sqrt(s * s + Rp * Rp - shift2);
    };
    std::vector<Field> out;
    out.push_back(Field::sample(grid, [&](double, double th) { return Rp / root(th); }));
    const int n = grid.spec().n;
    for (int k = 1; k <= n; ++k) {
        if (!grid.full()) {
            out.push_back(Field::zeros(grid));
            continue;
        }
        out.push_back(Field::sample(grid, [&](double, double th) {
            const double qk = k == 1 ? std::cos(th) : std::sin(th);
            const double s = detail::axis_projection(grid, y, th);
            return qk + (s * qk - y[k]) / root(th);
        }));
    }
    return out;
}

struct ChartOptions {
    int max_iterations = 40;
    double tolerance = 1e-15;
};

/// Solves coords(P rho(y)) = coords for y (coords as returned by
/// project_center). Newton with the analytic chart Jacobian; the linearized
/// map is diagonal at y = 0, which provides the starting guess.
inline CylinderParams chart_from_coords(const std::vector<double>& coords, const Grid& grid,
                                        const ChartOptions& opt = {}) {
    const int n = grid.spec().n;
    if (static_cast<int>(coords.size()) != n + 1) throw InvalidArgument("chart: expected n+1 coordinates");
    const auto basis = kernel_basis(grid);
    const int dim = static_cast<int>(basis.size());

    // Raw kernel functions 1, cos, sin have norms 1 / <v_raw, v_hat>.
    CylinderParams params{std::vector<double>(static_cast<size_t>(n + 1), 0.0)};
    for (int p = 0; p < dim; ++p) {
        const Field raw = p == 0 ? Field::constant(grid, 1.0) : raw_mode(grid, {1, p, 0});
        params.y[p] = coords[p] / inner(raw, basis[p]);
    }
    if (!grid.full()) return params;  // rho(y) is the constant y0: exact.

    double scale = 1.0;
    for (double c : coords) scale = std::max(scale, std::abs(c));
    for (int it = 0; it < opt.max_iterations; ++it) {
        Field cyl;
        std::vector<Field> jac;
        try {
            cyl = cylinder_graph(params, grid);
            jac = cylinder_graph_jacobian(params, grid);
        } catch (const OutsideChart& e) {
            throw NewtonDiverged(std::string("chart inversion left the chart: ") + e.what());
        }
        Eigen::VectorXd F(dim);
        Eigen::MatrixXd J(dim, dim);
        for (int p = 0; p < dim; ++p) {
            F[p] = inner(cyl, basis[p]) - coords[p];
            for (int k = 0; k < dim; ++k) J(p, k) = inner(jac[k], basis[p]);
        }
        const Eigen::VectorXd delta = J.partialPivLu().solve(-F);
        if (!delta.allFinite()) throw NewtonDiverged("chart inversion produced a non-finite step");
        for (int k = 0; k < dim; ++k) params.y[k] += delta[k];
        if (delta.lpNorm<Eigen::Infinity>() <= opt.tolerance * (1.0 + grid.spec().R) &&
            F.lpNorm<Eigen::Infinity>() <= 1e-13 * scale)
            return params;
        if (delta.lpNorm<Eigen::Infinity>() <= 1e-16 * (1.0 + grid.spec().R)) return params;
    }
    // Roundoff can keep the last update above tolerance; accept a tiny residual.
    const Field cyl = cylinder_graph(params, grid);
    double res = 0.0;
    for (int p = 0; p < dim; ++p) res = std::max(res, std::abs(inner(cyl, basis[p]) - coords[p]));
    if (res <= 1e-12 * scale) return params;
    throw NewtonDiverged("chart inversion did not converge (residual " + std::to_string(res) + ")");
}

/// gamma(z): the stable-space component of the cylinder whose center
/// coordinates are z.
inline Field center_manifold_map(const std::vector<double>& z_coords, const Grid& grid) {
    const Field cyl = cylinder_graph(chart_from_coords(z_coords, grid), grid);
    return stable_part(cyl);
}

struct AreaVolumeCheck {
    bool holds = false;
    double lhs = 0.0;  // area
    double rhs = 0.0;  // volume / d
};

/// |Omega| <= V / d. Equality is accepted within 1e-12 relative so that
/// the boundary case R = n d is not lost to rounding.
inline AreaVolumeCheck check_area_volume_condition(const Field& rho) {
    AreaVolumeCheck out;
    out.lhs = area(rho);
    out.rhs = volume(rho) / rho.grid().spec().d;
    out.holds = out.lhs <= out.rhs * (1.0 + 1e-12);
    return out;
}

// ---------------------------------------------------------------------------
// Axisymmetric constant-mean-curvature profiles

struct CmcProfile {
    Eigen::VectorXd r;
    double h = 0.0;
    CylinderSpec spec;
};

struct FixedVolume {
    double V;
};
struct FixedAmplitude {
    double a;
};
using CmcConstraint = std::variant<FixedVolume, FixedAmplitude>;

enum class CmcStatus { converged, newton_diverged, singular_jacobian, left_neighbourhood };

inline const char* to_string(CmcStatus s) {
    switch (s) {
        case CmcStatus::converged: return "converged";
        case CmcStatus::newton_diverged: return "newton_diverged";
        case CmcStatus::singular_jacobian: return "singular_jacobian";
        case CmcStatus::left_neighbourhood: return "left_neighbourhood";
    }
    return "unknown";
}

struct CmcOptions {
    int max_iterations = 40;
    double tolerance = 1e-11;
    /// Converged profiles farther than this fraction of R from the
    /// reference radius are reported as left_neighbourhood.
    double neighbourhood = 0.25;
    /// Reciprocal condition estimate below which the Jacobian is singular.
    double rcond_min = 1e-13;
};

struct CmcResult {
    CmcProfile profile;
    CmcStatus status = CmcStatus::newton_diverged;
    int iterations = 0;
    double residual_inf = INFINITY;
    double constraint_error = INFINITY;
    std::string message;
};

inline Grid cmc_grid(const CmcProfile& p) { return make_grid(p.spec, static_cast<int>(p.r.size())); }

inline Field profile_height(const CmcProfile& p, const Grid& g) {
    return Field(g, (p.r.array() - p.spec.R).matrix());
}

/// H(r)(z_j) - h.
inline Eigen::VectorXd cmc_residual(const CmcProfile& p) {
    const Grid g = cmc_grid(p);
    const Field H = surface_scalars(profile_height(p, g)).H;
    return H.values().col(0).array() - p.h;
}

/// Coefficient of cos(pi z / d) in r.
inline double cos_amplitude(const CmcProfile& p) {
    const Grid g = cmc_grid(p);
    return g.tables().cos_fwd.row(1).dot(p.r);
}

namespace detail {

inline double constraint_value(const CmcProfile& p, const Grid& g, const CmcConstraint& c) {
    if (const auto* fv = std::get_if<FixedVolume>(&c)) return volume(profile_height(p, g)) - fv->V;
    return g.tables().cos_fwd.row(1).dot(p.r) - std::get<FixedAmplitude>(c).a;
}

inline Eigen::RowVectorXd constraint_gradient(const CmcProfile& p, const Grid& g, const CmcConstraint& c) {
    const auto& t = g.tables();
    if (std::holds_alternative<FixedVolume>(c)) {
        const int n = p.spec.n;
        // volume = wtheta * sum_j wz_j r_j^n / (n R^{n-1})
        Eigen::RowVectorXd grad(p.r.size());
        for (Eigen::Index j = 0; j < p.r.size(); ++j)
            grad[j] = t.wtheta * t.wz[j] * std::pow(p.r[j], n - 1) / std::pow(p.spec.R, n - 1);
        return grad;
    }
    return t.cos_fwd.row(1);
}

} // namespace detail

/// Jacobian of (H(r) - h, constraint) with respect to (r, h).
inline Eigen::MatrixXd cmc_jacobian(const CmcProfile& p, const CmcConstraint& c) {
    const Grid g = cmc_grid(p);
    const auto& t = g.tables();
    const int N = static_cast<int>(p.r.size());
    const int n = p.spec.n;

    // Spectral differentiation matrices on even (cosine) data.
    const Eigen::VectorXd kz = t.kz;
    const Eigen::MatrixXd D1 = t.sin_inv * (-kz).asDiagonal() * t.cos_fwd;
    const Eigen::MatrixXd D2 = t.cos_inv * (-kz.array().square()).matrix().asDiagonal() * t.cos_fwd;

    const Eigen::ArrayXd r = p.r.array();
    const Eigen::ArrayXd rz = (D1 * p.r).array();
    const Eigen::ArrayXd rzz = (D2 * p.r).array();
    const Eigen::ArrayXd L2 = 1.0 + rz.square();
    const Eigen::ArrayXd L = L2.sqrt();
    const Eigen::ArrayXd L3 = L2 * L;

    const Eigen::ArrayXd dH_dr = -(n - 1.0) / (r.square() * L);
    const Eigen::ArrayXd dH_drz = -(n - 1.0) * rz / (r * L3) + 3.0 * rzz * rz / (L3 * L2);
    const Eigen::ArrayXd dH_drzz = -1.0 / L3;

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N + 1, N + 1);
    J.topLeftCorner(N, N) = dH_drz.matrix().asDiagonal() * D1 + dH_drzz.matrix().asDiagonal() * D2;
    J.topLeftCorner(N, N).diagonal() += dH_dr.matrix();
    J.block(0, N, N, 1).setConstant(-1.0);
    J.block(N, 0, 1, N) = detail::constraint_gradient(p, g, c);
    return J;
}

inline CmcResult solve_cmc(const CmcProfile& initial, const CmcConstraint& constraint, const CmcOptions& opt = {}) {
    initial.spec.validate();
    CmcResult out;
    out.profile = initial;
    CmcProfile& p = out.profile;
    const Grid g = cmc_grid(p);
    const int N = static_cast<int>(p.r.size());

    const auto evaluate = [&](Eigen::VectorXd& F) {
        F.resize(N + 1);
        F.head(N) = cmc_residual(p);
        F[N] = detail::constraint_value(p, g, constraint);
        out.residual_inf = F.head(N).lpNorm<Eigen::Infinity>();
        out.constraint_error = std::abs(F[N]);
    };

    Eigen::VectorXd F;
    try {
        if ((p.r.array() <= 0.0).any()) throw AxisTouched("initial profile has non-positive radius");
        evaluate(F);
        for (out.iterations = 0; out.iterations <= opt.max_iterations; ++out.iterations) {
            if (out.residual_inf <= opt.tolerance && out.constraint_error <= opt.tolerance) break;
            if (out.iterations == opt.max_iterations) {
                out.status = CmcStatus::newton_diverged;
                out.message = "no convergence after " + std::to_string(opt.max_iterations) + " iterations";
                return out;
            }
            const Eigen::MatrixXd J = cmc_jacobian(p, constraint);
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
            if (!(lu.rcond() > opt.rcond_min)) {
                out.status = CmcStatus::singular_jacobian;
                out.message = "Jacobian is singular (rcond " + std::to_string(lu.rcond()) + ")";
                return out;
            }
            const Eigen::VectorXd delta = lu.solve(-F);
            p.r += delta.head(N);
            p.h += delta[N];
            if (!p.r.allFinite() || !std::isfinite(p.h) || (p.r.array() <= 0.0).any()) {
                out.status = CmcStatus::newton_diverged;
                out.message = "iterate left the graph regime";
                return out;
            }
            evaluate(F);
        }
    } catch (const Error& e) {
        out.status = CmcStatus::newton_diverged;
        out.message = e.what();
        return out;
    }

    const double excursion = (p.r.array() - p.spec.R).abs().maxCoeff();
    if (excursion > opt.neighbourhood * p.spec.R) {
        out.status = CmcStatus::left_neighbourhood;
        out.message = "converged to a profile " + std::to_string(excursion) + " away from the reference radius";
        return out;
    }
    out.status = CmcStatus::converged;
    return out;
}

inline CmcProfile cylinder_profile(const CylinderSpec& spec, int nz) {
    return {Eigen::VectorXd::Constant(nz, spec.R), (spec.n - 1) / spec.R, spec};
}

struct BifurcationTest {
    /// Singular values of the volume-constrained Jacobian at the cylinder,
    /// relative to the largest.
    double smallest_ratio = 0.0;
    double second_ratio = 0.0;
    /// |cos(pi z/d) coefficient| over the largest other coefficient of the
    /// r-part of the null vector.
    double cos_dominance = 0.0;
    bool has_kernel = false;
};

/// Checks whether the volume-constrained CMC Jacobian at the reference
/// cylinder has a one-dimensional kernel along cos(pi z / d).
inline BifurcationTest bifurcation_test(const CylinderSpec& spec, int nz = 33) {
    const CmcProfile cyl = cylinder_profile(spec, nz);
    const Grid g = cmc_grid(cyl);
    const CmcConstraint c = FixedVolume{volume(Field::zeros(g))};
    const Eigen::MatrixXd J = cmc_jacobian(cyl, c);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::Index last = s.size() - 1;
    BifurcationTest out;
    out.smallest_ratio = s[last] / s[0];
    out.second_ratio = s[last - 1] / s[0];
    const Eigen::VectorXd v = svd.matrixV().col(last).head(nz);
    const Eigen::VectorXd coeffs = g.tables().cos_fwd * v;
    double others = std::abs(svd.matrixV()(nz, last));  // h component
    for (int m = 0; m < nz; ++m)
        if (m != 1) others = std::max(others, std::abs(coeffs[m]));
    out.cos_dominance = std::abs(coeffs[1]) / std::max(others, 1e-300);
    out.has_kernel = out.smallest_ratio <= 1e-10 && out.second_ratio > 1e-8 && out.cos_dominance >= 1e3;
    return out;
}

struct Branch {
    /// The a = 0 member: the reference cylinder.
    CmcProfile origin;
    /// Profiles at a = a_max k / steps, k = 1..steps.
    std::vector<CmcProfile> profiles;
    std::vector<double> amplitudes;
    bool complete = false;
    std::string message;
};

/// Amplitude continuation of the unduloid family bifurcating from the
/// critical cylinder. Requires |R - R*| <= 1e-6.
inline Branch trace_branch(const CylinderSpec& spec, double a_max, int steps, int nz = 33,
                           const CmcOptions& opt = {}) {
    spec.validate();
    const double rstar = critical_radius(spec.n, spec.d);
    if (std::abs(spec.R - rstar) > 1e-6)
        throw InvalidArgument("trace_branch: R = " + std::to_string(spec.R) + " is not the critical radius " +
                              std::to_string(rstar));
    if (steps < 1) throw InvalidArgument("trace_branch: steps must be >= 1");
    if (!(a_max >= 0.0) || !std::isfinite(a_max)) throw InvalidArgument("trace_branch: a_max must be >= 0");

    Branch out;
    out.origin = cylinder_profile(spec, nz);
    const Grid g = cmc_grid(out.origin);
    const Eigen::VectorXd cos1 = g.tables().cos_inv.col(1);

    CmcProfile prev2 = out.origin, prev = out.origin;
    double a_prev2 = 0.0, a_prev = 0.0;
    for (int k = 1; k <= steps; ++k) {
        const double a = a_max * k / steps;
        if (a == 0.0) {
            out.profiles.push_back(out.origin);
            out.amplitudes.push_back(0.0);
            continue;
        }
        CmcProfile guess = prev;
        if (a_prev == 0.0) {
            guess.r += a * cos1;
        } else {
            // Secant predictor through the last two members.
            const double w = (a - a_prev) / (a_prev - a_prev2);
            guess.r = prev.r + w * (prev.r - prev2.r);
            guess.h = prev.h + w * (prev.h - prev2.h);
        }
        const CmcResult res = solve_cmc(guess, FixedAmplitude{a}, opt);
        if (res.status != CmcStatus::converged) {
            out.message = "step " + std::to_string(k) + " (a = " + std::to_string(a) + "): " + to_string(res.status) +
                          ": " + res.message;
            return out;
        }
        out.profiles.push_back(res.profile);
        out.amplitudes.push_back(a);
        prev2 = prev;
        a_prev2 = a_prev;
        prev = res.profile;
        a_prev = a;
    }
    out.complete = true;
    return out;
}

} // namespace cylflow
