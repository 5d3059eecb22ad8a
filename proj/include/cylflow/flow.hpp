#pragma once

// Time integration of rho' = G(rho) = A rho + N(rho), where A is the
// linearized speed (diagonal in the cosine x circular-harmonic basis with
// eigenvalues lambda_{l,m}) and N the nonlinear remainder. A is treated
// implicitly mode by mode, N explicitly.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cylflow/geometry.hpp"
#include "cylflow/grid.hpp"
#include "cylflow/spectral.hpp"
#include "cylflow/stationary.hpp"

namespace cylflow {

enum class Scheme { imex1, imex2 };

inline const char* to_string(Scheme s) { return s == Scheme::imex1 ? "imex1" : "imex2"; }

struct ModeAmplitude {
    ModeIndex index;
    double amplitude = 0.0;
};

/// Uniform random amplitudes in [-amplitude, amplitude] on every raw mode
/// with l <= max_l, m <= max_m.
struct RandomPerturbation {
    double amplitude = 0.0;
    int max_l = 0;
    int max_m = 4;
    std::uint64_t seed = 0;
};

struct InitialCondition {
    std::vector<ModeAmplitude> modes;
    /// Cylinder parameters y (n + 1 entries) or empty for the reference.
    std::vector<double> cylinder;
    std::optional<RandomPerturbation> random;
};

struct FlowConfig {
    CylinderSpec spec;
    int nz = 33;
    std::optional<int> ntheta;
    double dt = 1e-3;
    double t_end = 1.0;
    Scheme scheme = Scheme::imex1;
    InitialCondition initial;
    bool renormalize_volume = false;
    /// Diagnostics every output_stride steps (the last step is always recorded).
    int output_stride = 1;
    /// Snapshot every snapshot_stride steps; 0 keeps only the final state.
    int snapshot_stride = 0;
    /// Blowup once sup|rho| >= blowup_fraction * R.
    double blowup_fraction = 0.9;
    /// Failed steps are retried as two half steps at most this many times.
    int max_halvings = 4;

    void validate() const {
        spec.validate();
        if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("FlowConfig: dt must be positive");
        if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InvalidArgument("FlowConfig: t_end must be positive");
        if (dt > t_end) throw InvalidArgument("FlowConfig: dt must not exceed t_end");
        if (output_stride < 1) throw InvalidArgument("FlowConfig: output_stride must be >= 1");
        if (snapshot_stride < 0) throw InvalidArgument("FlowConfig: snapshot_stride must be >= 0");
        if (!(blowup_fraction > 0.0 && blowup_fraction <= 1.0))
            throw InvalidArgument("FlowConfig: blowup_fraction must lie in (0, 1]");
        if (max_halvings < 0) throw InvalidArgument("FlowConfig: max_halvings must be >= 0");
    }

    Grid make_grid() const { return cylflow::make_grid(spec, nz, ntheta); }
};

struct DiagnosticsRecord {
    double t = 0.0;
    double volume = 0.0;
    double area = 0.0;
    double h = 0.0;
    double sup_rho = 0.0;
    /// ||(I - P) rho||_{L^2}
    double stable_norm = 0.0;
    /// Parameters of the nearest cylinder (chart inversion of P rho).
    std::vector<double> y;
    double min_radius = 0.0;
    /// ||rho - cylinder_graph(y)||_{L^2}
    double dist = 0.0;
};

enum class Termination { completed, axis_touched, blowup };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::completed: return "completed";
        case Termination::axis_touched: return "axis_touched";
        case Termination::blowup: return "blowup";
    }
    return "unknown";
}

struct Snapshot {
    double t = 0.0;
    Field rho;
};

struct Trajectory {
    Grid grid;
    std::vector<Snapshot> snapshots;
    std::vector<DiagnosticsRecord> diagnostics;
    Termination termination = Termination::completed;
    std::string message;
    Field final_state;
    double final_time = 0.0;
    long steps = 0;
};

struct CylinderFit {
    std::vector<double> y;
    double dist = 0.0;
};

/// Nearest member of the cylinder family in center coordinates: y solves
/// P rho(y) = P state, dist = ||state - rho(y)||_{L^2}. Axisymmetric grids
/// only see the radius offset.
inline CylinderFit distance_to_cylinders(const Field& state) {
    const CenterProjection proj = project_center(state);
    CylinderFit out;
    const CylinderParams params = chart_from_coords(proj.coords, state.grid());
    out.y = params.y;
    out.dist = l2_norm(state - cylinder_graph(params, state.grid()));
    return out;
}

inline Field initial_field(const InitialCondition& ic, const Grid& grid) {
    const int n = grid.spec().n;
    Field rho = Field::zeros(grid);
    if (!ic.cylinder.empty()) {
        if (static_cast<int>(ic.cylinder.size()) != n + 1)
            throw InvalidArgument("initial condition: cylinder needs n+1 parameters");
        rho = cylinder_graph({ic.cylinder}, grid);
    }
    for (const auto& mode : ic.modes) rho += raw_mode(grid, mode.index) * mode.amplitude;
    if (ic.random && ic.random->amplitude != 0.0) {
        const auto& rp = *ic.random;
        std::mt19937_64 gen(rp.seed);
        // 53-bit mantissa mapping keeps the draw identical across standard libraries.
        const auto uniform = [&] { return 2.0 * static_cast<double>(gen() >> 11) * 0x1.0p-53 - 1.0; };
        const int l_top = grid.full() ? std::min(rp.max_l, grid.ntheta() / 2 - 1) : 0;
        for (int m = 0; m <= std::min(rp.max_m, grid.nz() - 2); ++m)
            for (int l = 0; l <= l_top; ++l)
                for (int p = 1; p <= (l == 0 ? 1 : 2); ++p) rho += raw_mode(grid, {l, p, m}) * (rp.amplitude * uniform());
    }
    const double rmin = grid.spec().R + rho.min();
    if (!(rmin > 0.0)) throw InvalidArgument("initial condition: R + rho0 must stay positive");
    return rho;
}

inline Field initial_field(const FlowConfig& cfg) { return initial_field(cfg.initial, cfg.make_grid()); }

namespace detail {

inline void check_blowup(const Field& rho, double blowup_fraction) {
    const double R = rho.grid().spec().R;
    if (!(rho.sup_norm() < blowup_fraction * R))
        throw Blowup("sup|rho| = " + std::to_string(rho.sup_norm()) + " exceeded " + std::to_string(blowup_fraction) +
                     " R");
}

inline Eigen::MatrixXd remainder_coeffs(const Field& rho) { return to_coeffs(nonlinear_remainder(rho)).coeffs(); }

} // namespace detail

/// One IMEX step. imex1: c' = (c + dt N_hat) / (1 - dt lambda) per mode.
/// imex2: the two-stage, second-order ARS(2,2,2) scheme on the same split.
inline Field step(const Field& state, double t, double dt, Scheme scheme, double blowup_fraction = 0.9) {
    (void)t;  // autonomous
    if (!(dt > 0.0)) throw InvalidArgument("step: dt must be positive");
    const Grid& g = state.grid();
    const Eigen::ArrayXXd lam = linear_symbol(g).array();
    const Eigen::ArrayXXd c0 = to_coeffs(state).coeffs().array();
    const Eigen::ArrayXXd n0 = detail::remainder_coeffs(state).array();

    Eigen::ArrayXXd next;
    if (scheme == Scheme::imex1) {
        next = (c0 + dt * n0) / (1.0 - dt * lam);
    } else {
        const double gamma = 1.0 - 1.0 / std::sqrt(2.0);
        const double delta = 1.0 - 1.0 / (2.0 * gamma);
        const Eigen::ArrayXXd denom = 1.0 - gamma * dt * lam;
        const Eigen::ArrayXXd y1 = (c0 + gamma * dt * n0) / denom;
        const Field stage(g, from_coeffs(CoeffField(g, y1.matrix())).values());
        const Eigen::ArrayXXd n1 = detail::remainder_coeffs(stage).array();
        next = (c0 + dt * ((1.0 - gamma) * lam * y1 + delta * n0 + (1.0 - delta) * n1)) / denom;
    }
    if (!next.allFinite()) throw Blowup("step produced non-finite coefficients");
    Field out = from_coeffs(CoeffField(g, next.matrix()));
    detail::check_blowup(out, blowup_fraction);
    if (!(g.spec().R + out.min() > 1e-9 * g.spec().R)) throw AxisTouched("step reached the axis");
    return out;
}

inline DiagnosticsRecord diagnose(const Field& rho, double t) {
    const SpeedEvaluation ev = evaluate_speed(rho);
    DiagnosticsRecord rec;
    rec.t = t;
    rec.volume = volume(rho);
    rec.area = quad(ev.scalars.mu);
    rec.h = ev.h;
    rec.sup_rho = rho.sup_norm();
    rec.stable_norm = l2_norm(stable_part(rho));
    rec.min_radius = rho.grid().spec().R + rho.min();
    try {
        const CylinderFit fit = distance_to_cylinders(rho);
        rec.y = fit.y;
        rec.dist = fit.dist;
    } catch (const Error&) {
        // Far from the chart: report the linearized chart coordinates.
        const auto proj = project_center(rho);
        rec.y.assign(proj.coords.size(), 0.0);
        const auto basis = kernel_basis(rho.grid());
        for (size_t p = 0; p < basis.size(); ++p) {
            const Field raw = p == 0 ? Field::constant(rho.grid(), 1.0) : raw_mode(rho.grid(), {1, static_cast<int>(p), 0});
            rec.y[p] = proj.coords[p] / inner(raw, basis[p]);
        }
        rec.dist = rec.stable_norm;
    }
    return rec;
}

/// Called with (t, rho) for the initial state and after every accepted step.
using StepObserver = std::function<void(double, const Field&)>;

namespace detail {

// Advances by dt, splitting into half steps when a step fails.
inline Field guarded_step(const Field& rho, double t, double dt, const FlowConfig& cfg, int halvings_left) {
    try {
        return step(rho, t, dt, cfg.scheme, cfg.blowup_fraction);
    } catch (const Error&) {
        if (halvings_left == 0) throw;
        const Field mid = guarded_step(rho, t, 0.5 * dt, cfg, halvings_left - 1);
        return guarded_step(mid, t + 0.5 * dt, 0.5 * dt, cfg, halvings_left - 1);
    }
}

inline Field renormalize(const Field& rho, double target_volume) {
    const CylinderSpec& spec = rho.grid().spec();
    const double s = std::pow(target_volume / volume(rho), 1.0 / spec.n);
    const Eigen::MatrixXd v = (s * (rho.values().array() + spec.R) - spec.R).matrix();
    return Field(rho.grid(), v);
}

} // namespace detail

inline Trajectory run(const FlowConfig& cfg, const StepObserver& observer = {}) {
    cfg.validate();
    Trajectory traj;
    traj.grid = cfg.make_grid();
    Field rho = initial_field(cfg.initial, traj.grid);
    const double v0 = volume(rho);

    const long nsteps = std::max(1L, static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9)));
    traj.diagnostics.push_back(diagnose(rho, 0.0));
    if (cfg.snapshot_stride > 0) traj.snapshots.push_back({0.0, rho});
    if (observer) observer(0.0, rho);

    double t = 0.0;
    for (long k = 1; k <= nsteps; ++k) {
        const double t_next = k == nsteps ? cfg.t_end : static_cast<double>(k) * cfg.dt;
        try {
            rho = detail::guarded_step(rho, t, t_next - t, cfg, cfg.max_halvings);
            if (cfg.renormalize_volume) rho = detail::renormalize(rho, v0);
        } catch (const AxisTouched& e) {
            traj.termination = Termination::axis_touched;
            traj.message = e.what();
            break;
        } catch (const Error& e) {
            traj.termination = Termination::blowup;
            traj.message = e.what();
            break;
        }
        t = t_next;
        traj.steps = k;
        if (observer) observer(t, rho);
        if (k % cfg.output_stride == 0 || k == nsteps) traj.diagnostics.push_back(diagnose(rho, t));
        if (cfg.snapshot_stride > 0 && (k % cfg.snapshot_stride == 0 || k == nsteps)) traj.snapshots.push_back({t, rho});
    }
    if (traj.termination != Termination::completed && traj.diagnostics.back().t != t) {
        traj.diagnostics.push_back(diagnose(rho, t));
        if (cfg.snapshot_stride > 0) traj.snapshots.push_back({t, rho});
    }
    traj.final_state = rho;
    traj.final_time = t;
    return traj;
}

struct DecayFit {
    /// Negated least-squares slope of log(norm) against t.
    double rate = 0.0;
    /// False when the fitted slope is >= 0 (growth or stagnation).
    bool decaying = false;
    int points = 0;
};

inline DecayFit fit_decay_rate(std::span<const double> t, std::span<const double> norm, double t_a, double t_b) {
    if (t.size() != norm.size()) throw InvalidArgument("fit_decay_rate: series lengths differ");
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    int count = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_a || t[i] > t_b) continue;
        if (!(norm[i] > 0.0) || !std::isfinite(norm[i]))
            throw InsufficientData("fit_decay_rate: series must be strictly positive in the window");
        const double y = std::log(norm[i]);
        st += t[i];
        sy += y;
        stt += t[i] * t[i];
        sty += t[i] * y;
        ++count;
    }
    if (count < 10) throw InsufficientData("fit_decay_rate: need at least 10 records in the window, got " +
                                           std::to_string(count));
    const double denom = count * stt - st * st;
    if (!(denom > 0.0)) throw InsufficientData("fit_decay_rate: degenerate time window");
    const double slope = (count * sty - st * sy) / denom;
    return {-slope, slope < 0.0, count};
}

/// Decay rate of ||(I - P) rho||_{L^2} over [t_a, t_b].
inline DecayFit fit_decay_rate(const Trajectory& traj, double t_a, double t_b) {
    std::vector<double> t, v;
    for (const auto& r : traj.diagnostics) {
        t.push_back(r.t);
        v.push_back(r.stable_norm);
    }
    return fit_decay_rate(t, v, t_a, t_b);
}

} // namespace cylflow
