#pragma once

// Discretization of the cylinder C = S^{n-1}_R x [0, d].
//
// z is sampled on endpoint-including uniform nodes and expanded in the
// Neumann cosine basis cos(m pi z / d) (type-I DCT). Fields that are odd
// about the walls (first z-derivatives of admissible height functions) use
// the matching sine basis (type-I DST). For n = 2 the angle is sampled on
// a uniform periodic grid and expanded in real circular harmonics
// {1, cos l theta, sin l theta}; for n > 2 only axisymmetric fields are
// represented.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "cylflow/error.hpp"

namespace cylflow {

/// Reference cylinder of dimension n (hypersurface in R^{n+1}), radius R and
/// slab width d.
struct CylinderSpec {
    int n = 2;
    double R = 1.0;
    double d = 1.0;

    void validate() const {
        if (n < 2) throw InvalidArgument("CylinderSpec: n must be >= 2, got " + std::to_string(n));
        if (!(R > 0.0) || !std::isfinite(R)) throw InvalidArgument("CylinderSpec: R must be positive and finite");
        if (!(d > 0.0) || !std::isfinite(d)) throw InvalidArgument("CylinderSpec: d must be positive and finite");
    }

    /// Area of the unit sphere S^{n-1}: 2 pi^{n/2} / Gamma(n/2).
    double sphere_area() const {
        return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
    }

    /// |C| = sigma_{n-1} R^{n-1} d.
    double reference_area() const { return sphere_area() * std::pow(R, n - 1) * d; }

    bool operator==(const CylinderSpec&) const = default;
};

enum class GridMode { axisymmetric, full };

/// Symmetry of a field under reflection about the slab walls. Height
/// functions are even (cosine series); their z-derivatives are odd.
enum class Parity { even, odd };

inline Parity operator*(Parity a, Parity b) { return a == b ? Parity::even : Parity::odd; }

namespace detail {

struct GridTables {
    CylinderSpec spec;
    int nz = 0;
    int ntheta = 1;
    GridMode mode = GridMode::axisymmetric;

    Eigen::VectorXd z;
    Eigen::VectorXd theta;

    // Forward maps take nodal values to coefficients, inverse maps back.
    Eigen::MatrixXd cos_fwd, cos_inv;
    Eigen::MatrixXd sin_fwd, sin_inv;
    Eigen::MatrixXd ang_fwd, ang_inv;

    Eigen::VectorXd kz;          // m pi / d
    Eigen::VectorXi ang_order;   // angular index -> l
    Eigen::VectorXi ang_label;   // angular index -> p (1 = cos, 2 = sin)

    Eigen::VectorXd wz;          // z quadrature weights
    double wtheta = 1.0;         // weight of each angular node (includes R^{n-1} and sigma)

    Eigen::VectorXd parseval_even_z, parseval_odd_z, parseval_ang;
};

// cos(pi * q / M) with the argument reduced exactly in integers first.
inline double cos_pi_ratio(long long q, long long M) {
    q %= 2 * M;
    return std::cos(std::numbers::pi * static_cast<double>(q) / static_cast<double>(M));
}
inline double sin_pi_ratio(long long q, long long M) {
    q %= 2 * M;
    return std::sin(std::numbers::pi * static_cast<double>(q) / static_cast<double>(M));
}

inline std::shared_ptr<const GridTables> build_tables(const CylinderSpec& spec, int nz,
                                                      std::optional<int> ntheta) {
    spec.validate();
    if (nz < 4) throw InvalidArgument("make_grid: N_z must be >= 4, got " + std::to_string(nz));
    auto t = std::make_shared<GridTables>();
    t->spec = spec;
    t->nz = nz;
    if (ntheta) {
        if (spec.n != 2) throw InvalidArgument("make_grid: full mode requires n=2");
        if (*ntheta < 4 || *ntheta % 2 != 0)
            throw InvalidArgument("make_grid: N_theta must be even and >= 4, got " + std::to_string(*ntheta));
        t->mode = GridMode::full;
        t->ntheta = *ntheta;
    }

    const long long M = nz - 1;
    t->z.resize(nz);
    for (int j = 0; j < nz; ++j) t->z[j] = spec.d * static_cast<double>(j) / static_cast<double>(M);
    t->kz.resize(nz);
    for (int m = 0; m < nz; ++m) t->kz[m] = static_cast<double>(m) * std::numbers::pi / spec.d;

    t->cos_fwd.resize(nz, nz);
    t->cos_inv.resize(nz, nz);
    t->sin_fwd.setZero(nz, nz);
    t->sin_inv.setZero(nz, nz);
    for (int m = 0; m < nz; ++m) {
        const double gamma = (m == 0 || m == M) ? static_cast<double>(M) : 0.5 * static_cast<double>(M);
        for (int j = 0; j < nz; ++j) {
            const double c = cos_pi_ratio(static_cast<long long>(m) * j, M);
            const double w = (j == 0 || j == M) ? 0.5 : 1.0;
            t->cos_inv(j, m) = c;
            t->cos_fwd(m, j) = w * c / gamma;
            if (m > 0 && m < M && j > 0 && j < M) {
                const double s = sin_pi_ratio(static_cast<long long>(m) * j, M);
                t->sin_inv(j, m) = s;
                t->sin_fwd(m, j) = 2.0 * s / static_cast<double>(M);
            }
        }
    }

    const double h = spec.d / static_cast<double>(M);
    t->wz = Eigen::VectorXd::Constant(nz, h);
    t->wz[0] = t->wz[M] = 0.5 * h;
    t->parseval_even_z = Eigen::VectorXd::Constant(nz, 0.5 * spec.d);
    t->parseval_even_z[0] = t->parseval_even_z[M] = spec.d;
    t->parseval_odd_z = Eigen::VectorXd::Constant(nz, 0.5 * spec.d);
    t->parseval_odd_z[0] = t->parseval_odd_z[M] = 0.0;

    const int nt = t->ntheta;
    t->theta.resize(nt);
    t->ang_fwd.resize(nt, nt);
    t->ang_inv.resize(nt, nt);
    t->ang_order.resize(nt);
    t->ang_label.resize(nt);
    t->parseval_ang.resize(nt);
    if (t->mode == GridMode::axisymmetric) {
        t->theta[0] = 0.0;
        t->ang_fwd(0, 0) = 1.0;
        t->ang_inv(0, 0) = 1.0;
        t->ang_order[0] = 0;
        t->ang_label[0] = 1;
        t->wtheta = spec.sphere_area() * std::pow(spec.R, spec.n - 1);
        t->parseval_ang[0] = t->wtheta;
    } else {
        const long long L = nt / 2;
        for (int k = 0; k < nt; ++k) t->theta[k] = 2.0 * std::numbers::pi * k / nt;
        for (int a = 0; a < nt; ++a) {
            int l = 0, p = 1;
            bool is_sin = false;
            if (a == 0) {
                l = 0;
            } else if (a == nt - 1) {
                l = static_cast<int>(L);
            } else {
                l = (a + 1) / 2;
                is_sin = (a % 2 == 0);
                p = is_sin ? 2 : 1;
            }
            t->ang_order[a] = l;
            t->ang_label[a] = p;
            const bool single = (a == 0 || a == nt - 1);
            t->parseval_ang[a] = (single ? 2.0 : 1.0) * std::numbers::pi * spec.R;
            for (int k = 0; k < nt; ++k) {
                // angle l * theta_k = pi * (2 l k) / nt
                const long long q = 2LL * l * k;
                const double b = is_sin ? sin_pi_ratio(q, nt) : cos_pi_ratio(q, nt);
                t->ang_inv(k, a) = b;
                t->ang_fwd(a, k) = (single ? 1.0 : 2.0) * b / nt;
            }
        }
        t->wtheta = 2.0 * std::numbers::pi * spec.R / nt;
    }
    return t;
}

} // namespace detail

/// Collocation mesh on the reference cylinder. Cheap to copy; tables are
/// shared and immutable.
class Grid {
public:
    Grid() = default;

    static Grid make(const CylinderSpec& spec, int nz, std::optional<int> ntheta = std::nullopt) {
        Grid g;
        g.t_ = detail::build_tables(spec, nz, ntheta);
        return g;
    }

    const CylinderSpec& spec() const { return t_->spec; }
    int nz() const { return t_->nz; }
    /// Number of angular nodes; 1 in axisymmetric mode.
    int ntheta() const { return t_->ntheta; }
    GridMode mode() const { return t_->mode; }
    bool full() const { return t_->mode == GridMode::full; }

    double z(int j) const { return t_->z[j]; }
    double theta(int k) const { return t_->theta[k]; }
    const Eigen::VectorXd& z_nodes() const { return t_->z; }
    const Eigen::VectorXd& theta_nodes() const { return t_->theta; }

    /// Axial wavenumber m pi / d.
    double kz(int m) const { return t_->kz[m]; }
    int angular_order(int a) const { return t_->ang_order[a]; }
    int angular_label(int a) const { return t_->ang_label[a]; }

    /// Column holding circular harmonic (l, p), p = 1 for cos and 2 for sin.
    /// Returns -1 when the harmonic is not representable on this grid.
    int angular_index(int l, int p) const {
        if (l == 0) return p == 1 ? 0 : -1;
        if (!full()) return -1;
        const int L = ntheta() / 2;
        if (l > L) return -1;
        if (l == L) return p == 1 ? ntheta() - 1 : -1;
        if (p == 1) return 2 * l - 1;
        if (p == 2) return 2 * l;
        return -1;
    }

    const detail::GridTables& tables() const { return *t_; }

    bool same_layout(const Grid& o) const {
        return t_ == o.t_ ||
               (t_->spec == o.t_->spec && t_->nz == o.t_->nz && t_->ntheta == o.t_->ntheta && t_->mode == o.t_->mode);
    }

private:
    std::shared_ptr<const detail::GridTables> t_;
};

inline Grid make_grid(const CylinderSpec& spec, int nz, std::optional<int> ntheta = std::nullopt) {
    return Grid::make(spec, nz, ntheta);
}

/// Real samples on the grid nodes; rows index z, columns index theta.
class Field {
public:
    Field() = default;

    Field(Grid grid, Eigen::MatrixXd values, Parity parity = Parity::even)
        : grid_(std::move(grid)), values_(std::move(values)), parity_(parity) {
        if (values_.rows() != grid_.nz() || values_.cols() != grid_.ntheta())
            throw InvalidArgument("Field: shape does not match grid");
        if (!values_.allFinite()) throw InvalidArgument("Field: non-finite entries");
    }

    static Field zeros(const Grid& g) { return Field(g, Eigen::MatrixXd::Zero(g.nz(), g.ntheta())); }
    static Field constant(const Grid& g, double c) {
        return Field(g, Eigen::MatrixXd::Constant(g.nz(), g.ntheta(), c));
    }

    /// Samples fn(z, theta); theta is 0 on axisymmetric grids.
    template <class Fn>
    static Field sample(const Grid& g, Fn&& fn, Parity parity = Parity::even) {
        Eigen::MatrixXd v(g.nz(), g.ntheta());
        for (int j = 0; j < g.nz(); ++j)
            for (int k = 0; k < g.ntheta(); ++k) v(j, k) = fn(g.z(j), g.theta(k));
        return Field(g, std::move(v), parity);
    }

    const Grid& grid() const { return grid_; }
    const Eigen::MatrixXd& values() const { return values_; }
    Parity parity() const { return parity_; }
    double operator()(int j, int k = 0) const { return values_(j, k); }

    double sup_norm() const { return values_.cwiseAbs().maxCoeff(); }
    double min() const { return values_.minCoeff(); }
    double max() const { return values_.maxCoeff(); }

    Field& operator+=(const Field& o) {
        check_compatible(o);
        values_ += o.values_;
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_compatible(o);
        values_ -= o.values_;
        return *this;
    }
    Field& operator*=(double s) {
        values_ *= s;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(Field a, double s) { return a *= s; }
    friend Field operator*(double s, Field a) { return a *= s; }
    friend Field operator-(Field a) { return a *= -1.0; }

    /// Pointwise product on the collocation grid.
    friend Field operator*(const Field& a, const Field& b) {
        if (!a.grid_.same_layout(b.grid_)) throw InvalidArgument("Field: grids differ");
        return Field(a.grid_, a.values_.cwiseProduct(b.values_), a.parity_ * b.parity_);
    }

private:
    void check_compatible(const Field& o) const {
        if (!grid_.same_layout(o.grid_)) throw InvalidArgument("Field: grids differ");
        if (parity_ != o.parity_) throw InvalidArgument("Field: cannot add fields of different parity");
    }

    Grid grid_;
    Eigen::MatrixXd values_;
    Parity parity_ = Parity::even;
};

/// Expansion coefficients: rows are the axial order m, columns the angular
/// index (see Grid::angular_order / angular_label).
class CoeffField {
public:
    CoeffField() = default;
    CoeffField(Grid grid, Eigen::MatrixXd coeffs, Parity parity = Parity::even)
        : grid_(std::move(grid)), coeffs_(std::move(coeffs)), parity_(parity) {
        if (coeffs_.rows() != grid_.nz() || coeffs_.cols() != grid_.ntheta())
            throw InvalidArgument("CoeffField: shape does not match grid");
    }

    const Grid& grid() const { return grid_; }
    const Eigen::MatrixXd& coeffs() const { return coeffs_; }
    Eigen::MatrixXd& coeffs() { return coeffs_; }
    Parity parity() const { return parity_; }
    double operator()(int m, int a) const { return coeffs_(m, a); }
    double& operator()(int m, int a) { return coeffs_(m, a); }

    /// Per-coefficient weights w such that quad(f^2) = sum w * c^2.
    Eigen::MatrixXd parseval_weights() const {
        const auto& t = grid_.tables();
        const Eigen::VectorXd& wz = parity_ == Parity::even ? t.parseval_even_z : t.parseval_odd_z;
        return wz * t.parseval_ang.transpose();
    }

private:
    Grid grid_;
    Eigen::MatrixXd coeffs_;
    Parity parity_ = Parity::even;
};

inline CoeffField to_coeffs(const Field& f) {
    const auto& t = f.grid().tables();
    const Eigen::MatrixXd& zf = f.parity() == Parity::even ? t.cos_fwd : t.sin_fwd;
    return CoeffField(f.grid(), zf * f.values() * t.ang_fwd.transpose(), f.parity());
}

inline Field from_coeffs(const CoeffField& c) {
    const auto& t = c.grid().tables();
    const Eigen::MatrixXd& zi = c.parity() == Parity::even ? t.cos_inv : t.sin_inv;
    return Field(c.grid(), zi * c.coeffs() * t.ang_inv.transpose(), c.parity());
}

namespace detail {

// Multiplies every coefficient row m by fn(m).
template <class Fn>
void scale_rows(Eigen::MatrixXd& c, Fn&& fn) {
    for (Eigen::Index m = 0; m < c.rows(); ++m) c.row(m) *= fn(static_cast<int>(m));
}

// Angular derivative in coefficient space (cos l <-> sin l exchange).
inline Eigen::MatrixXd dtheta_coeffs(const Grid& g, const Eigen::MatrixXd& c) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(c.rows(), c.cols());
    if (!g.full()) return out;
    const int nt = g.ntheta();
    for (int l = 1; l < nt / 2; ++l) {
        const int ac = 2 * l - 1, as = 2 * l;
        out.col(as) = -static_cast<double>(l) * c.col(ac);
        out.col(ac) = static_cast<double>(l) * c.col(as);
    }
    return out;
}

} // namespace detail

/// z-derivative; flips parity.
inline Field d_dz(const Field& f) {
    CoeffField c = to_coeffs(f);
    const Grid& g = f.grid();
    Eigen::MatrixXd out = c.coeffs();
    const double sign = f.parity() == Parity::even ? -1.0 : 1.0;
    detail::scale_rows(out, [&](int m) { return sign * g.kz(m); });
    const Parity p = f.parity() == Parity::even ? Parity::odd : Parity::even;
    if (p == Parity::odd) {
        out.row(0).setZero();
        out.row(g.nz() - 1).setZero();
    }
    return from_coeffs(CoeffField(g, std::move(out), p));
}

inline Field d2_dz2(const Field& f) {
    CoeffField c = to_coeffs(f);
    const Grid& g = f.grid();
    Eigen::MatrixXd out = c.coeffs();
    detail::scale_rows(out, [&](int m) { return -g.kz(m) * g.kz(m); });
    return from_coeffs(CoeffField(g, std::move(out), f.parity()));
}

/// Angular derivative d/dtheta (zero on axisymmetric grids).
inline Field d_dtheta(const Field& f) {
    CoeffField c = to_coeffs(f);
    return from_coeffs(CoeffField(f.grid(), detail::dtheta_coeffs(f.grid(), c.coeffs()), f.parity()));
}

inline Field d2_dtheta2(const Field& f) {
    const Grid& g = f.grid();
    CoeffField c = to_coeffs(f);
    Eigen::MatrixXd out = c.coeffs();
    for (int a = 0; a < g.ntheta(); ++a) {
        const double l = g.angular_order(a);
        out.col(a) *= -l * l;
    }
    return from_coeffs(CoeffField(g, std::move(out), f.parity()));
}

/// Laplace-Beltrami operator of the reference cylinder. On axisymmetric
/// grids the angular part vanishes (fields carry l = 0 only).
inline Field laplacian_cyl(const Field& f) {
    const Grid& g = f.grid();
    CoeffField c = to_coeffs(f);
    Eigen::MatrixXd out = c.coeffs();
    const double R2 = g.spec().R * g.spec().R;
    for (int m = 0; m < g.nz(); ++m)
        for (int a = 0; a < g.ntheta(); ++a) {
            const double l = g.angular_order(a);
            out(m, a) *= -(g.kz(m) * g.kz(m) + l * l / R2);
        }
    return from_coeffs(CoeffField(g, std::move(out), f.parity()));
}

/// Integral over the reference cylinder with respect to d mu_0.
inline double quad(const Field& f) {
    const auto& t = f.grid().tables();
    return t.wtheta * t.wz.dot(f.values().rowwise().sum());
}

inline double quad_values(const Grid& g, const Eigen::MatrixXd& v) {
    const auto& t = g.tables();
    return t.wtheta * t.wz.dot(v.rowwise().sum());
}

inline double inner(const Field& a, const Field& b) { return quad(a * b); }
inline double l2_norm(const Field& f) { return std::sqrt(std::max(0.0, inner(f, f))); }

} // namespace cylflow
