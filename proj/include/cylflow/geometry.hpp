#pragma once

// Differential geometry of the radial graph r = R + rho over the reference
// cylinder. Outward normal; the cylinder of radius R has H = (n-1)/R.
//
// Axisymmetric (any n), with L = sqrt(1 + r_z^2):
//   H  = (n-1) / (r L) - r_zz / L^3
//   mu = (r / R)^{n-1} L
// Full n = 2, surface (r cos t, r sin t, z), with L = sqrt(1 + r_z^2 + r_t^2 / r^2):
//   E = r^2 + r_t^2, F = r_t r_z, G = 1 + r_z^2, EG - F^2 = r^2 L^2
//   e = (r r_tt - r^2 - 2 r_t^2) / (r L), f = (r r_tz - r_z r_t) / (r L), g = r r_zz / (r L)
//   H  = -(e G - 2 f F + g E) / (r^2 L^2)
//   mu = r L / R
// L converts normal velocity into radial graph velocity.

#include <cmath>
#include <string>

#include "cylflow/grid.hpp"
#include "cylflow/spectral.hpp"

namespace cylflow {

struct SurfaceScalars {
    Field H;
    Field mu;
    Field L;
};

namespace detail {

inline void check_graph(const Field& rho) {
    const double R = rho.grid().spec().R;
    const double rmin = R + rho.min();
    if (!(rmin > 1e-9 * R))
        throw AxisTouched("radial graph touches the axis: min(R + rho) = " + std::to_string(rmin));
}

} // namespace detail

inline SurfaceScalars surface_scalars(const Field& rho) {
    detail::check_graph(rho);
    const Grid& g = rho.grid();
    const CylinderSpec& spec = g.spec();
    const Eigen::ArrayXXd r = rho.values().array() + spec.R;
    const Eigen::ArrayXXd rz = d_dz(rho).values().array();
    const Eigen::ArrayXXd rzz = d2_dz2(rho).values().array();

    Eigen::ArrayXXd H, mu, L;
    if (!g.full()) {
        const int n = spec.n;
        const Eigen::ArrayXXd L2 = 1.0 + rz.square();
        L = L2.sqrt();
        H = (n - 1.0) / (r * L) - rzz / (L2 * L);
        mu = (r / spec.R).pow(n - 1) * L;
    } else {
        const Field rho_t = d_dtheta(rho);
        const Eigen::ArrayXXd rt = rho_t.values().array();
        const Eigen::ArrayXXd rtt = d2_dtheta2(rho).values().array();
        const Eigen::ArrayXXd rtz = d_dz(rho_t).values().array();
        const Eigen::ArrayXXd L2 = 1.0 + rz.square() + rt.square() / r.square();
        L = L2.sqrt();
        const Eigen::ArrayXXd E = r.square() + rt.square();
        const Eigen::ArrayXXd F = rt * rz;
        const Eigen::ArrayXXd G = 1.0 + rz.square();
        const Eigen::ArrayXXd rL = r * L;
        const Eigen::ArrayXXd e = (r * rtt - r.square() - 2.0 * rt.square()) / rL;
        const Eigen::ArrayXXd f = (r * rtz - rz * rt) / rL;
        const Eigen::ArrayXXd gg = rzz / L;
        H = -(e * G - 2.0 * f * F + gg * E) / (r.square() * L2);
        mu = rL / spec.R;
    }
    return {Field(g, H.matrix()), Field(g, mu.matrix()), Field(g, L.matrix())};
}

inline double area(const Field& rho) { return quad(surface_scalars(rho).mu); }

/// Volume enclosed between the graph and the slab walls.
inline double volume(const Field& rho) {
    detail::check_graph(rho);
    const CylinderSpec& spec = rho.grid().spec();
    const Eigen::ArrayXXd r = rho.values().array() + spec.R;
    const Eigen::MatrixXd integrand = (r.pow(spec.n) / (spec.n * std::pow(spec.R, spec.n - 1))).matrix();
    return quad_values(rho.grid(), integrand);
}

/// h = int H d mu / int d mu.
inline double avg_mean_curvature(const SurfaceScalars& s) { return quad(s.H * s.mu) / quad(s.mu); }

/// Everything one evaluation of the flow speed produces.
struct SpeedEvaluation {
    SurfaceScalars scalars;
    double h = 0.0;
    Field speed;
};

inline SpeedEvaluation evaluate_speed(const Field& rho) {
    SpeedEvaluation out{surface_scalars(rho), 0.0, {}};
    out.h = avg_mean_curvature(out.scalars);
    const Eigen::ArrayXXd v = out.scalars.L.values().array() * (out.h - out.scalars.H.values().array());
    out.speed = Field(rho.grid(), v.matrix());
    return out;
}

/// G(rho) = L (h - H).
inline Field speed(const Field& rho) { return evaluate_speed(rho).speed; }

/// G(rho) minus its linearization at the reference cylinder.
inline Field nonlinear_remainder(const Field& rho) { return speed(rho) - apply_linearized(rho); }

} // namespace cylflow
