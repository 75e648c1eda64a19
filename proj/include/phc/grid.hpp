#pragma once

// Staggered (Yee) discretization of a SceneGeometry.
//
// Cell (i, j, k) spans [lower + (i, j, k) dx, lower + (i+1, j+1, k+1) dx].
// Component positions in units of dx relative to `lower`:
//
//   Ex (i+1/2, j, k)    Hx (i, j+1/2, k+1/2)
//   Ey (i, j+1/2, k)    Hy (i+1/2, j, k+1/2)
//   Ez (i, j, k+1/2)    Hz (i+1/2, j+1/2, k)
//
// Every component array has the same padded shape with one ghost layer on
// each side, so index -1 and index n are addressable along every axis.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "phc/errors.hpp"
#include "phc/geometry.hpp"
#include "phc/vec.hpp"

namespace phc {

/// Treatment of one face of the computational box.
enum class Boundary {
    pml,          ///< absorbing layer backed by a conducting wall
    pec,          ///< perfect electric conductor (tangential E = 0)
    periodic,     ///< wraps to the opposite face
    even_mirror,  ///< mirror plane, tangential E even (tangential H = 0); low faces only
    odd_mirror,   ///< mirror plane, tangential E odd (tangential E = 0); low faces only
};

inline bool is_mirror(Boundary b) { return b == Boundary::even_mirror || b == Boundary::odd_mirror; }

struct GridSpec {
    int resolution = 16;                       ///< cells per lattice constant
    Vec3 lower{-6.0, -6.0, -3.0};              ///< box corner, PML included
    Vec3 upper{6.0, 6.0, 7.0};
    double pml_thickness = 1.0;
    double courant_factor = 0.5;
    std::array<Boundary, 3> low{Boundary::pml, Boundary::pml, Boundary::pml};
    std::array<Boundary, 3> high{Boundary::pml, Boundary::pml, Boundary::pml};
    int pml_order = 3;
    double pml_reflection = 1e-6;              ///< theoretical normal-incidence reflection
    double pml_cfs_alpha = 0.2;                ///< complex-frequency shift at the PML entrance (1/time)

    double dx() const { return 1.0 / resolution; }
    Vec3 extent() const { return upper - lower; }

    /// Box of the given full extent centred on `center`.
    static GridSpec centered(Vec3 extent, Vec3 center = {}) {
        GridSpec g;
        g.lower = {center.x - extent.x / 2, center.y - extent.y / 2, center.z - extent.z / 2};
        g.upper = {center.x + extent.x / 2, center.y + extent.y / 2, center.z + extent.z / 2};
        return g;
    }

    bool has_pml(int axis) const { return low[axis] == Boundary::pml || high[axis] == Boundary::pml; }
};

inline void validate(const GridSpec& g) {
    if (g.resolution < 8) throw ConfigError("grid resolution must be at least 8 cells per lattice constant");
    if (!(g.courant_factor > 0.0 && g.courant_factor < 1.0))
        throw ConfigError("courant factor must lie strictly between 0 and 1");
    bool any_pml = false;
    for (int a = 0; a < 3; ++a) {
        if (!(g.upper[a] > g.lower[a])) throw ConfigError("grid box must have positive extent");
        if (is_mirror(g.high[a])) throw ConfigError("mirror boundaries are only supported on low faces");
        if (is_mirror(g.low[a]) && std::abs(g.lower[a]) > 1e-12)
            throw ConfigError("a mirror face must lie on the coordinate plane through the origin");
        if ((g.low[a] == Boundary::periodic) != (g.high[a] == Boundary::periodic))
            throw ConfigError("periodic boundaries must be set on both faces of an axis");
        any_pml = any_pml || g.has_pml(a);
    }
    if (any_pml && g.pml_thickness < 0.5) throw ConfigError("PML thickness must be at least 0.5 lattice constants");
    if (g.pml_order < 1) throw ConfigError("PML grading order must be >= 1");
    if (!(g.pml_reflection > 0.0 && g.pml_reflection < 1.0)) throw ConfigError("PML reflection target must be in (0, 1)");
}

/// CFL-stable time step: courant_factor * dx / sqrt(dimensions).
inline double courant_dt(const GridSpec& g, int dimensions = 3) {
    if (!(g.courant_factor > 0.0 && g.courant_factor < 1.0))
        throw ConfigError("courant factor must lie strictly between 0 and 1");
    if (dimensions < 1 || dimensions > 3) throw ConfigError("dimensions must be 1, 2 or 3");
    return g.courant_factor * g.dx() / std::sqrt(static_cast<double>(dimensions));
}

enum class FieldComponent : int { ex = 0, ey = 1, ez = 2, hx = 3, hy = 4, hz = 5 };

constexpr int axis_of(FieldComponent c) { return static_cast<int>(c) % 3; }
constexpr bool is_electric(FieldComponent c) { return static_cast<int>(c) < 3; }
constexpr FieldComponent e_component(int axis) { return static_cast<FieldComponent>(axis); }
constexpr FieldComponent h_component(int axis) { return static_cast<FieldComponent>(axis + 3); }

/// Offset (in cells) of a component's sample from the cell corner along `axis`.
constexpr double stagger(FieldComponent c, int axis) {
    const bool along = axis_of(c) == axis;
    return is_electric(c) ? (along ? 0.5 : 0.0) : (along ? 0.0 : 0.5);
}

/// Parity (+1 even, -1 odd) of a component under reflection through a mirror
/// plane normal to `axis` with boundary type `b`.
inline double mirror_parity(FieldComponent c, int axis, Boundary b) {
    const double e_tangential = b == Boundary::even_mirror ? 1.0 : -1.0;
    const bool normal = axis_of(c) == axis;
    // Normal E flips relative to tangential E; H (a pseudovector) is the reverse.
    if (is_electric(c)) return normal ? -e_tangential : e_tangential;
    return normal ? e_tangential : -e_tangential;
}

/// Inclusive index range along one axis.
struct IndexRange {
    int lo = 0;
    int hi = -1;
    int size() const { return hi >= lo ? hi - lo + 1 : 0; }
};

struct GridShape {
    std::array<int, 3> n{};               ///< cells per axis
    std::array<std::ptrdiff_t, 3> stride{};
    std::size_t size = 0;                 ///< padded element count

    GridShape() = default;
    explicit GridShape(std::array<int, 3> cells) : n(cells) {
        stride[0] = 1;
        stride[1] = n[0] + 2;
        stride[2] = stride[1] * (n[1] + 2);
        size = static_cast<std::size_t>(stride[2]) * static_cast<std::size_t>(n[2] + 2);
    }

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>((i + 1) * stride[0] + (j + 1) * stride[1] + (k + 1) * stride[2]);
    }
    std::size_t index(std::array<int, 3> ijk) const { return index(ijk[0], ijk[1], ijk[2]); }

    std::size_t cell_count() const {
        return static_cast<std::size_t>(n[0]) * static_cast<std::size_t>(n[1]) * static_cast<std::size_t>(n[2]);
    }
};

/// Per-axis graded conductivity of the absorbing layers, sampled at integer
/// (node) and half-integer (mid-cell) positions.
struct PmlProfile {
    std::vector<double> sigma_node;  ///< size n+1
    std::vector<double> sigma_mid;   ///< size n
    std::vector<double> alpha_node;
    std::vector<double> alpha_mid;
};

struct DiscretizedScene {
    GridSpec spec;
    GridShape shape;
    double dx = 0.0;
    std::array<std::vector<double>, 3> eps;  ///< permittivity at Ex, Ey, Ez positions
    std::array<PmlProfile, 3> pml;

    Vec3 lower() const { return spec.lower; }

    /// Physical position of component `c` at index (i, j, k).
    Vec3 position(FieldComponent c, std::array<int, 3> ijk) const {
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = spec.lower[a] + (ijk[a] + stagger(c, a)) * dx;
        return p;
    }

    /// Indices updated by the time stepper for component `c` along `axis`.
    IndexRange update_range(FieldComponent c, int axis) const {
        const int n = shape.n[axis];
        if (is_electric(c)) {
            if (axis_of(c) == axis) return {0, n - 1};
            const Boundary lo = spec.low[axis];
            const bool update_low = lo == Boundary::even_mirror || lo == Boundary::periodic;
            return {update_low ? 0 : 1, n - 1};
        }
        if (axis_of(c) == axis) return {0, n};
        return {0, n - 1};
    }

    /// Indices holding meaningful samples of `c` along `axis` (walls included).
    IndexRange stored_range(FieldComponent c, int axis) const {
        const int n = shape.n[axis];
        return stagger(c, axis) == 0.0 ? IndexRange{0, n} : IndexRange{0, n - 1};
    }

    /// True when a coordinate along `axis` lies inside an absorbing layer.
    bool in_pml(int axis, double coord) const {
        const double L = spec.pml_thickness;
        if (spec.low[axis] == Boundary::pml && coord < spec.lower[axis] + L - 1e-12) return true;
        if (spec.high[axis] == Boundary::pml && coord > spec.upper[axis] - L + 1e-12) return true;
        return false;
    }

    bool in_pml(Vec3 p) const { return in_pml(0, p.x) || in_pml(1, p.y) || in_pml(2, p.z); }

    /// Interior (non-PML) extent along an axis.
    std::pair<double, double> interior(int axis) const {
        double lo = spec.lower[axis], hi = spec.upper[axis];
        if (spec.low[axis] == Boundary::pml) lo += spec.pml_thickness;
        if (spec.high[axis] == Boundary::pml) hi -= spec.pml_thickness;
        return {lo, hi};
    }

    /// 2 for every axis with a mirror plane: the stored box is that fraction
    /// of the symmetric whole.
    int mirror_multiplicity() const {
        int m = 1;
        for (int a = 0; a < 3; ++a)
            if (is_mirror(spec.low[a])) m *= 2;
        return m;
    }
};

namespace detail {

inline double pml_depth(const GridSpec& g, int axis, double coord) {
    const double L = g.pml_thickness;
    double d = 0.0;
    if (g.low[axis] == Boundary::pml) d = std::max(d, g.lower[axis] + L - coord);
    if (g.high[axis] == Boundary::pml) d = std::max(d, coord - (g.upper[axis] - L));
    return std::clamp(d / L, 0.0, 1.0);
}

inline PmlProfile build_pml_profile(const GridSpec& g, int axis, int n, double dx) {
    PmlProfile p;
    p.sigma_node.assign(n + 1, 0.0);
    p.alpha_node.assign(n + 1, 0.0);
    p.sigma_mid.assign(n, 0.0);
    p.alpha_mid.assign(n, 0.0);
    if (!g.has_pml(axis)) return p;
    // Vacuum-impedance optimum for a polynomial grading of order m.
    const double m = g.pml_order;
    const double sigma_max = -(m + 1.0) * std::log(g.pml_reflection) / (2.0 * g.pml_thickness);
    auto fill = [&](double coord, double& sigma, double& alpha) {
        const double u = pml_depth(g, axis, coord);
        sigma = u > 0.0 ? sigma_max * std::pow(u, m) : 0.0;
        alpha = u > 0.0 ? g.pml_cfs_alpha * (1.0 - u) : 0.0;
    };
    for (int i = 0; i <= n; ++i) fill(g.lower[axis] + i * dx, p.sigma_node[i], p.alpha_node[i]);
    for (int i = 0; i < n; ++i) fill(g.lower[axis] + (i + 0.5) * dx, p.sigma_mid[i], p.alpha_mid[i]);
    return p;
}

/// Lateral half-extent and height of the rod region (rods + radius).
inline std::pair<double, double> rod_region(const SceneGeometry& scene) {
    double half = 0.0;
    for (const Vec2& s : lattice_sites(*scene.lattice))
        half = std::max({half, std::abs(s.x), std::abs(s.y)});
    return {half + scene.lattice->rod_radius, scene.lattice->rod_height};
}

}  // namespace detail

/// Number of subsamples per axis used when averaging permittivity over a
/// cell-sized cube around each component position.
inline constexpr int kEpsSubsamples = 2;

/// Mean permittivity over the cube of side `dx` centred on `p`, sampled on a
/// regular `n`×`n`×`n` lattice of points.
inline double cube_average_epsilon(const SceneGeometry& scene, Vec3 p, double dx, int n = kEpsSubsamples) {
    double sum = 0.0;
    for (int c = 0; c < n; ++c)
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a) {
                const Vec3 q{p.x + ((a + 0.5) / n - 0.5) * dx, p.y + ((b + 0.5) / n - 0.5) * dx,
                             p.z + ((c + 0.5) / n - 0.5) * dx};
                sum += epsilon_at(scene, q);
            }
    return sum / (n * n * n);
}

/// Sample the scene onto the Yee grid described by `spec`.
inline DiscretizedScene discretize(const SceneGeometry& scene, const GridSpec& spec) {
    validate(scene);
    validate(spec);
    DiscretizedScene d;
    d.spec = spec;
    d.dx = spec.dx();
    std::array<int, 3> n{};
    for (int a = 0; a < 3; ++a) {
        const double cells = spec.extent()[a] * spec.resolution;
        n[a] = static_cast<int>(std::lround(cells));
        if (std::abs(cells - n[a]) > 1e-6)
            throw ConfigError("grid extent along axis " + std::to_string(a) +
                              " is not a whole number of cells at this resolution");
        if (n[a] < 1) throw ConfigError("grid has no cells along an axis");
    }
    d.shape = GridShape(n);

    if (scene.lattice) {
        const auto [half, height] = detail::rod_region(scene);
        for (int a = 0; a < 2; ++a) {
            const auto [lo, hi] = d.interior(a);
            const double lo_needed = is_mirror(spec.low[a]) ? 0.0 : -half;
            if (spec.low[a] != Boundary::periodic && (lo > lo_needed + 1e-12 || hi < half - 1e-12))
                throw ConfigError("PML overlaps the rod region");
        }
        const auto [zlo, zhi] = d.interior(2);
        if (zlo > 1e-12 || zhi < height - 1e-12) throw ConfigError("PML overlaps the rod region");
    }

    for (int c = 0; c < 3; ++c) {
        const FieldComponent fc = e_component(c);
        auto& eps = d.eps[c];
        eps.assign(d.shape.size, 1.0);
        const IndexRange ri = d.stored_range(fc, 0), rj = d.stored_range(fc, 1), rk = d.stored_range(fc, 2);
        for (int k = rk.lo; k <= rk.hi; ++k)
            for (int j = rj.lo; j <= rj.hi; ++j)
                for (int i = ri.lo; i <= ri.hi; ++i)
                    eps[d.shape.index(i, j, k)] = cube_average_epsilon(scene, d.position(fc, {i, j, k}), d.dx);
    }
    for (int a = 0; a < 3; ++a) d.pml[a] = detail::build_pml_profile(spec, a, n[a], d.dx);
    return d;
}

}  // namespace phc
